"""Multiuser MIMO detection with M-PSK symbols.

A scene is the model ``y = H s + e`` with ``s`` drawn from the M-PSK alphabet
``{exp(2πim/M)}`` on each of ``U`` transmit antennas and ``B`` receive
antennas. Complex quantities are lifted to real vectors once, at scene
creation:

    ŷ = [Re y; Im y],    Ĥ = [[Re H, -Im H], [Im H, Re H]].

Estimators provided here:

* the polar-coordinate model over ``(r, θ)`` with amplitude barrier and phase
  penalty ``λ_θ ||sin(Mθ/2)||_1`` (:func:`build_proposed_model`),
* the unit-modulus least-squares model (:func:`build_modulus_model`),
* the sum-of-absolute-values model on the constellation hull (:func:`build_soav_model`),
* linear MMSE (:func:`lmmse`).
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionError, ParameterError
from .mathkit import project_regular_polygon, symmetric_sqrt
from .prox import (
    BoxIndicator,
    CompositeProblem,
    ScaledL1,
    SetIndicator,
    SmoothMap,
    SmoothTerm,
    ZeroFunction,
)
from .rng import make_rng

__all__ = [
    "MimoScene",
    "PolarPoint",
    "correlation_matrix",
    "gray_encode",
    "gray_decode",
    "psk_points",
    "generate_scene",
    "lift_vector",
    "lift_matrix",
    "polar_map",
    "barrier_d",
    "PolarDataTerm",
    "PhaseMap",
    "build_proposed_model",
    "build_modulus_model",
    "build_soav_model",
    "lmmse",
    "polar_start",
    "soav_start",
    "subgradient_eta",
    "demodulate",
    "demodulate_ber",
]


@dataclass(frozen=True)
class MimoScene:
    U: int
    B: int
    M: int
    H_real: np.ndarray  # (2B, 2U)
    y_real: np.ndarray  # (2B,)
    s_true: np.ndarray  # (2U,) lifted transmitted symbols
    symbols: np.ndarray  # (U,) constellation index of each antenna
    bits: np.ndarray  # (U, log2 M) Gray-coded bits
    sigma2: float
    seed: int = 0

    @property
    def bits_per_symbol(self):
        return self.bits.shape[1]


@dataclass(frozen=True)
class PolarPoint:
    r: np.ndarray
    theta: np.ndarray

    def as_vector(self):
        return np.concatenate([self.r, self.theta])

    @classmethod
    def from_vector(cls, x):
        x = np.asarray(x, dtype=np.float64)
        U = x.size // 2
        return cls(x[:U], x[U:])


# --------------------------------------------------------------------------- scene


def correlation_matrix(B, rho=0.5):
    idx = np.arange(B)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def gray_encode(m):
    m = np.asarray(m)
    return m ^ (m >> 1)


def gray_decode(g):
    g = np.array(g, copy=True)
    shift = g >> 1
    while np.any(shift):
        g ^= shift
        shift >>= 1
    return g


def _bits_of(labels, k):
    labels = np.asarray(labels)
    return ((labels[..., None] >> np.arange(k - 1, -1, -1)) & 1).astype(np.int8)


def psk_points(M):
    """Complex constellation ``exp(2πim/M)``, ``m = 0..M-1``."""
    return np.exp(2j * np.pi * np.arange(M) / M)


def lift_vector(v):
    v = np.asarray(v)
    return np.concatenate([v.real, v.imag]).astype(np.float64)


def lift_matrix(A):
    A = np.asarray(A)
    return np.block([[A.real, -A.imag], [A.imag, A.real]]).astype(np.float64)


def generate_scene(U, B, M, snr_db, seed):
    """Draw one detection scene.

    ``H = sqrt(R) G`` with ``R_jk = 0.5^|j-k|`` and ``G`` i.i.d. CN(0, 1/B);
    the noise is CN(0, σ²) with ``σ² = 10^(-snr_db/10)``. ``snr_db = inf`` gives
    a noiseless scene. Symbol ``m`` carries the Gray label ``m ^ (m >> 1)``.
    """
    for name, val in (("U", U), ("B", B)):
        if int(val) != val or val < 1:
            raise ParameterError(f"{name} must be a positive integer, got {val}")
    if int(M) != M or M < 2 or (int(M) & (int(M) - 1)):
        raise ParameterError(f"M must be a power of two >= 2, got {M}")
    if np.isnan(snr_db) or snr_db == -np.inf:
        raise ParameterError(f"invalid SNR {snr_db}")
    U, B, M = int(U), int(B), int(M)
    sigma2 = 0.0 if snr_db == np.inf else 10.0 ** (-snr_db / 10.0)
    rng = make_rng(seed)
    symbols = rng.integers(0, M, size=U)
    s = psk_points(M)[symbols]
    G = (rng.standard_normal((B, U)) + 1j * rng.standard_normal((B, U))) * np.sqrt(0.5 / B)
    H = symmetric_sqrt(correlation_matrix(B)) @ G
    e = (rng.standard_normal(B) + 1j * rng.standard_normal(B)) * np.sqrt(0.5 * sigma2)
    y = H @ s + e
    k = int(np.log2(M))
    return MimoScene(
        U=U,
        B=B,
        M=M,
        H_real=lift_matrix(H),
        y_real=lift_vector(y),
        s_true=lift_vector(s),
        symbols=symbols,
        bits=_bits_of(gray_encode(symbols), k),
        sigma2=sigma2,
        seed=int(seed),
    )


# --------------------------------------------------------------------------- polar model


def polar_map(p):
    """``(r, θ) ↦ [r cos θ; r sin θ]``. Accepts a :class:`PolarPoint` or a stacked vector."""
    if not isinstance(p, PolarPoint):
        p = PolarPoint.from_vector(p)
    return np.concatenate([p.r * np.cos(p.theta), p.r * np.sin(p.theta)])


def barrier_d(t, r_min):
    """Amplitude barrier: ``1/t`` for ``t >= r_min``, linear ``-t/r_min + 1 + 1/r_min`` below.

    Returns ``(value, derivative)``; works elementwise on arrays.
    """
    if not 0 < r_min <= 1:
        raise ParameterError(f"r_min must lie in (0, 1], got {r_min}")
    t = np.asarray(t, dtype=np.float64)
    upper = t >= r_min
    safe = np.where(upper, t, 1.0)
    val = np.where(upper, 1.0 / safe, -t / r_min + 1.0 + 1.0 / r_min)
    der = np.where(upper, -1.0 / safe**2, -1.0 / r_min)
    if val.ndim == 0:
        return float(val), float(der)
    return val, der


class PolarDataTerm(SmoothTerm):
    """``h(r, θ) = ½||y - H φ(r, θ)||² + λ_r Σ_u d(r_u)``."""

    def __init__(self, H, y, lam_r, r_min):
        self.H = H
        self.y = y
        self.U = H.shape[1] // 2
        self.lam_r = float(lam_r)
        self.r_min = float(r_min)
        # Lipschitz bound is not used by the algorithm; record ||H||^2 as a scale.
        self.lipschitz_grad = float(np.linalg.norm(H, 2) ** 2)

    def _parts(self, x):
        U = self.U
        r, th = x[:U], x[U:]
        c, s = np.cos(th), np.sin(th)
        res = self.H @ np.concatenate([r * c, r * s]) - self.y
        return r, c, s, res

    def value(self, x):
        r, _, _, res = self._parts(x)
        val = 0.5 * float(res @ res)
        if self.lam_r:
            val += self.lam_r * float(np.sum(barrier_d(r, self.r_min)[0]))
        return val

    def gradient(self, x):
        return self.value_and_gradient(x)[1]

    def value_and_gradient(self, x):
        U = self.U
        r, c, s, res = self._parts(x)
        gs = self.H.T @ res
        ga, gb = gs[:U], gs[U:]
        grad_r = ga * c + gb * s
        grad_t = r * (gb * c - ga * s)
        val = 0.5 * float(res @ res)
        if self.lam_r:
            dv, dd = barrier_d(r, self.r_min)
            val += self.lam_r * float(np.sum(dv))
            grad_r = grad_r + self.lam_r * dd
        return val, np.concatenate([grad_r, grad_t])


class PhaseMap(SmoothMap):
    """``(r, θ) ↦ sin(Mθ/2)``."""

    def __init__(self, U, M):
        self.U = int(U)
        self.M = int(M)
        self.d_in = 2 * self.U
        self.d_out = self.U

    def value(self, x):
        return np.sin(0.5 * self.M * x[self.U:])

    def jacobian_adjoint(self, x, y):
        out = np.zeros(self.d_in)
        out[self.U:] = 0.5 * self.M * np.cos(0.5 * self.M * x[self.U:]) * y
        return out


def build_proposed_model(scene, lam_r, lam_theta, r_min):
    """Polar model over ``x = (r, θ) ∈ R^{2U}`` with ``r ∈ [r_min, 1]^U``."""
    if lam_r < 0 or lam_theta < 0:
        raise ParameterError("regularization weights must be nonnegative")
    if not 0 < r_min <= 1:
        raise ParameterError(f"r_min must lie in (0, 1], got {r_min}")
    U = scene.U
    h = PolarDataTerm(scene.H_real, scene.y_real, lam_r, r_min)
    S = PhaseMap(U, scene.M)
    g = ScaledL1(lam_theta, U) if lam_theta > 0 else ZeroFunction()
    lo = np.concatenate([np.full(U, float(r_min)), np.full(U, -np.inf)])
    hi = np.concatenate([np.ones(U), np.full(U, np.inf)])
    phi = BoxIndicator(lo, hi)
    half_m = 0.5 * scene.M

    def subgradient(x):
        # ∇h + DS^*[λ_θ sign(S x)], an element of the limiting subdifferential
        _, gh = h.value_and_gradient(x)
        th = x[U:]
        v = gh.copy()
        v[U:] += lam_theta * half_m * np.cos(half_m * th) * np.sign(np.sin(half_m * th))
        return v

    return CompositeProblem(h=h, g=g, S=S, phi=phi, subgradient=subgradient, name="proposed")


def build_modulus_model(scene):
    """Unit-modulus least squares: the polar model with ``r`` pinned to 1 and no penalties."""
    p = build_proposed_model(scene, 0.0, 0.0, 1.0)
    return CompositeProblem(h=p.h, g=p.g, S=p.S, phi=p.phi, subgradient=p.subgradient, name="modulus")


# --------------------------------------------------------------------------- SOAV


class LeastSquares(SmoothTerm):
    """``½||y - H s||²``."""

    def __init__(self, H, y):
        self.H = H
        self.y = y
        self.lipschitz_grad = float(np.linalg.norm(H, 2) ** 2)

    def value(self, x):
        res = self.H @ x - self.y
        return 0.5 * float(res @ res)

    def gradient(self, x):
        return self.H.T @ (self.H @ x - self.y)

    def value_and_gradient(self, x):
        res = self.H @ x - self.y
        return 0.5 * float(res @ res), self.H.T @ res


class ShiftStack(SmoothMap):
    """``s ↦ [s - ŝ_0; s - ŝ_1; ...; s - ŝ_{M-1}]`` with ``ŝ_m`` the lifted ``exp(2πim/M)·1``."""

    def __init__(self, U, M):
        self.U, self.M = int(U), int(M)
        self.d_in = 2 * self.U
        self.d_out = 2 * self.U * self.M
        pts = psk_points(self.M)
        self.shifts = np.stack([lift_vector(np.full(self.U, z)) for z in pts])  # (M, 2U)

    def value(self, x):
        return (x[None, :] - self.shifts).reshape(-1)

    def jacobian_adjoint(self, x, y):
        return np.asarray(y).reshape(self.M, self.d_in).sum(axis=0)


def _polygon_projector(U, M):
    def project(s):
        z = np.stack([s[:U], s[U:]], axis=1)
        p = project_regular_polygon(M, z)
        return np.concatenate([p[:, 0], p[:, 1]])

    return project


def build_soav_model(scene, lam):
    """SOAV model over the lifted symbol vector, constrained to the constellation hull."""
    if lam < 0:
        raise ParameterError(f"lam must be nonnegative, got {lam}")
    U, M = scene.U, scene.M
    h = LeastSquares(scene.H_real, scene.y_real)
    S = ShiftStack(U, M)
    g = ScaledL1(lam / M, S.d_out) if lam > 0 else ZeroFunction()
    phi = SetIndicator(_polygon_projector(U, M), tol=1e-9, name=f"Conv({M}-PSK)^{U}")
    return CompositeProblem(h=h, g=g, S=S, phi=phi, name="soav")


# --------------------------------------------------------------------------- baselines and demodulation


def lmmse(scene):
    """``(HᵀH + σ²I)⁻¹ Hᵀ y`` on the lifted scene."""
    H, y = scene.H_real, scene.y_real
    A = H.T @ H + scene.sigma2 * np.eye(H.shape[1])
    return scipy.linalg.solve(A, H.T @ y, assume_a="sym", check_finite=True)


def polar_start(scene, r_min):
    """Polar coordinates of the LMMSE estimate, amplitudes clipped into ``[r_min, 1]``."""
    s = lmmse(scene)
    U = scene.U
    a, b = s[:U], s[U:]
    r = np.clip(np.hypot(a, b), r_min, 1.0)
    return np.concatenate([r, np.arctan2(b, a)])


def soav_start(scene):
    return _polygon_projector(scene.U, scene.M)(lmmse(scene))


def subgradient_eta(scene):
    """Weak-convexity parameter ``4((2+√U)||H||² + ||Hᵀy||) + √U M²/4`` of the polar cost."""
    H, y = scene.H_real, scene.y_real
    rU = np.sqrt(scene.U)
    return 4.0 * ((2.0 + rU) * np.linalg.norm(H, 2) ** 2 + np.linalg.norm(H.T @ y)) + rU * scene.M**2 / 4.0


def demodulate(s_est, M):
    """Nearest-phase constellation index for each antenna of a lifted estimate."""
    s_est = np.asarray(s_est, dtype=np.float64)
    U = s_est.size // 2
    ang = np.arctan2(s_est[U:], s_est[:U])
    return np.mod(np.rint(ang * M / (2.0 * np.pi)).astype(np.int64), M)


def demodulate_ber(scene, s_est):
    """Bit error rate of a lifted estimate against the transmitted Gray-coded bits.

    Returns ``(ber, symbol_errors)``.
    """
    s_est = np.asarray(s_est, dtype=np.float64)
    if s_est.shape != (2 * scene.U,):
        raise DimensionError(f"expected shape ({2 * scene.U},), got {s_est.shape}")
    idx = demodulate(s_est, scene.M)
    bits = _bits_of(gray_encode(idx), scene.bits_per_symbol)
    errors = int(np.sum(bits != scene.bits))
    return errors / scene.bits.size, int(np.sum(idx != scene.symbols))
