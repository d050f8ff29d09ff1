r"""Building blocks of the composite model ``h + g∘S + φ``.

* :class:`SmoothTerm`  -- ``h``, differentiable with Lipschitz gradient.
* :class:`ProxFunction` -- ``g``, Lipschitz, weakly convex, cheap prox.
* :class:`SmoothMap`   -- ``S``, C^1 map with a Jacobian-adjoint product.
* :class:`ConvexTerm`  -- ``φ``, closed convex, cheap prox (usually an indicator).

The Moreau envelope of ``g`` is only ever evaluated through its prox:

.. math::

    {}^{\mu}g(z) = g(p) + \|p - z\|^2 / (2\mu), \qquad
    \nabla {}^{\mu}g(z) = (z - p) / \mu, \qquad p = \mathrm{prox}_{\mu g}(z).
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DimensionError, ParameterError
from .mathkit import project_simplex

__all__ = [
    "CONVEX_ETA",
    "ProxFunction",
    "ScaledL1",
    "MaxCoordinate",
    "ZeroFunction",
    "SmoothTerm",
    "ZeroSmooth",
    "Quadratic",
    "SmoothMap",
    "IdentityMap",
    "LinearMap",
    "ConvexTerm",
    "FreeTerm",
    "BoxIndicator",
    "SetIndicator",
    "CompositeProblem",
    "check_mu",
    "effective_eta",
    "moreau_value",
    "moreau_gradient",
    "smoothing_schedule",
    "prox_scaled_l1",
    "prox_max",
    "indicator_box",
]

#: Modulus substituted for a convex ``g`` when building the smoothing schedule.
CONVEX_ETA = 1.0


def _vec(z):
    return np.asarray(z, dtype=np.float64)


# --------------------------------------------------------------------------- g


class ProxFunction(ABC):
    """Lipschitz, ``eta``-weakly convex function with an exact prox.

    Attributes
    ----------
    eta : float
        Weak-convexity modulus; 0 for convex functions.
    lipschitz : float
        Lipschitz constant of the function in the Euclidean norm.
    """

    eta = 0.0
    lipschitz = 1.0

    @abstractmethod
    def evaluate(self, z):
        """Function value at ``z``."""

    @abstractmethod
    def prox(self, mu, z):
        """``argmin_w evaluate(w) + ||w - z||^2 / (2 mu)``."""

    def __call__(self, z):
        return self.evaluate(z)


class ScaledL1(ProxFunction):
    """``z ↦ lam * ||z||_1`` on R^dim.

    ``dim`` only enters the Lipschitz constant ``lam * sqrt(dim)``.
    """

    def __init__(self, lam, dim):
        if lam < 0:
            raise ParameterError(f"lam must be >= 0, got {lam}")
        if dim < 1:
            raise DimensionError(f"dim must be >= 1, got {dim}")
        self.lam = float(lam)
        self.dim = int(dim)
        self.lipschitz = self.lam * np.sqrt(self.dim)

    def evaluate(self, z):
        return self.lam * float(np.sum(np.abs(z)))

    def prox(self, mu, z):
        return prox_scaled_l1(self.lam, mu, z)

    def __repr__(self):
        return f"ScaledL1(lam={self.lam!r}, dim={self.dim})"


class MaxCoordinate(ProxFunction):
    """``z ↦ max_j z_j``; convex and 1-Lipschitz."""

    lipschitz = 1.0

    def evaluate(self, z):
        return float(np.max(z))

    def prox(self, mu, z):
        return prox_max(mu, z)

    def __repr__(self):
        return "MaxCoordinate()"


class ZeroFunction(ProxFunction):
    lipschitz = 0.0

    def evaluate(self, z):
        return 0.0

    def prox(self, mu, z):
        return _vec(z).copy()

    def __repr__(self):
        return "ZeroFunction()"


def check_mu(g, mu):
    """Raise unless ``0 < mu < 1/eta`` (no upper bound when ``eta == 0``)."""
    if not (mu > 0 and np.isfinite(mu)):
        raise ParameterError(f"smoothing parameter must be positive, got {mu}")
    if g.eta > 0 and mu * g.eta >= 1.0:
        raise ParameterError(f"smoothing parameter {mu} is not below 1/eta = {1.0 / g.eta}")


def effective_eta(g, override=None):
    """Modulus used by the schedule: ``override``, else ``g.eta``, else 1."""
    if override is not None:
        if override <= 0:
            raise ParameterError(f"eta override must be positive, got {override}")
        return float(override)
    return float(g.eta) if g.eta > 0 else CONVEX_ETA


def moreau_value(g, mu, z):
    """Moreau envelope of ``g`` with index ``mu`` at ``z``."""
    check_mu(g, mu)
    z = _vec(z)
    p = g.prox(mu, z)
    return g.evaluate(p) + float(np.sum((p - z) ** 2)) / (2.0 * mu)


def moreau_gradient(g, mu, z):
    """Gradient ``(z - prox_{mu g}(z)) / mu`` of the Moreau envelope."""
    check_mu(g, mu)
    z = _vec(z)
    return (z - g.prox(mu, z)) / mu


def smoothing_schedule(n, eta, alpha):
    """Smoothing index ``(2 eta)^-1 n^(-1/alpha)`` for iteration ``n >= 1``."""
    if n < 1:
        raise ParameterError(f"iteration index must be >= 1, got {n}")
    if not eta > 0:
        raise ParameterError(f"eta must be positive, got {eta}")
    if not alpha >= 1:
        raise ParameterError(f"alpha must be >= 1, got {alpha}")
    return float(n) ** (-1.0 / alpha) / (2.0 * eta)


def prox_scaled_l1(lam, mu, z):
    """Soft thresholding at level ``lam * mu``."""
    if lam < 0 or not mu > 0:
        raise ParameterError(f"need lam >= 0 and mu > 0, got lam={lam}, mu={mu}")
    z = _vec(z)
    return np.sign(z) * np.maximum(np.abs(z) - lam * mu, 0.0)


def prox_max(mu, z):
    """Prox of ``mu * max(.)`` via Moreau decomposition.

    The conjugate of ``max`` is the indicator of the unit simplex, hence
    ``prox_{mu max}(z) = z - mu * P_simplex(z / mu)``.
    """
    if not mu > 0:
        raise ParameterError(f"mu must be positive, got {mu}")
    z = _vec(z)
    if z.ndim != 1 or z.size == 0:
        raise DimensionError("prox_max expects a non-empty 1-D array")
    return z - mu * project_simplex(z / mu)


# --------------------------------------------------------------------------- h


class SmoothTerm(ABC):
    """Differentiable ``h`` with ``lipschitz_grad`` bounding the gradient's Lipschitz constant."""

    lipschitz_grad = 0.0

    @abstractmethod
    def value(self, x):
        pass

    @abstractmethod
    def gradient(self, x):
        pass

    def value_and_gradient(self, x):
        return self.value(x), self.gradient(x)


class ZeroSmooth(SmoothTerm):
    def value(self, x):
        return 0.0

    def gradient(self, x):
        return np.zeros_like(_vec(x))


class Quadratic(SmoothTerm):
    """``h(x) = 0.5 x^T A x + b^T x + c`` with symmetric ``A``."""

    def __init__(self, A, b=None, c=0.0):
        A = np.atleast_2d(_vec(A))
        if A.shape[0] != A.shape[1]:
            raise DimensionError(f"A must be square, got {A.shape}")
        self.A = 0.5 * (A + A.T)
        self.b = np.zeros(A.shape[0]) if b is None else _vec(b).reshape(A.shape[0])
        self.c = float(c)
        self.lipschitz_grad = float(np.max(np.abs(np.linalg.eigvalsh(self.A))))

    def value(self, x):
        x = _vec(x)
        return float(0.5 * x @ self.A @ x + self.b @ x + self.c)

    def gradient(self, x):
        return self.A @ _vec(x) + self.b


# --------------------------------------------------------------------------- S


class SmoothMap(ABC):
    """C^1 map ``S: R^d_in -> R^d_out``."""

    d_in: int
    d_out: int

    @abstractmethod
    def value(self, x):
        pass

    @abstractmethod
    def jacobian_adjoint(self, x, y):
        """``DS(x)^* [y]``."""


class IdentityMap(SmoothMap):
    def __init__(self, dim):
        self.d_in = self.d_out = int(dim)

    def value(self, x):
        return _vec(x)

    def jacobian_adjoint(self, x, y):
        return _vec(y)


class LinearMap(SmoothMap):
    """``S(x) = A x + offset``."""

    def __init__(self, A, offset=None):
        self.A = np.atleast_2d(_vec(A))
        self.d_out, self.d_in = self.A.shape
        self.offset = np.zeros(self.d_out) if offset is None else _vec(offset)

    def value(self, x):
        return self.A @ _vec(x) + self.offset

    def jacobian_adjoint(self, x, y):
        return self.A.T @ _vec(y)


# --------------------------------------------------------------------------- φ


class ConvexTerm(ABC):
    """Proper closed convex ``φ`` with an exact prox."""

    @abstractmethod
    def prox(self, gamma, z):
        pass

    @abstractmethod
    def evaluate(self, z):
        """Value of ``φ`` (``inf`` outside the domain)."""

    def in_domain(self, z):
        return bool(np.isfinite(self.evaluate(z)))


class FreeTerm(ConvexTerm):
    """``φ ≡ 0``."""

    def prox(self, gamma, z):
        return _vec(z).copy()

    def evaluate(self, z):
        return 0.0

    def in_domain(self, z):
        return True


class SetIndicator(ConvexTerm):
    """Indicator of a closed convex set given by its projector.

    Parameters
    ----------
    project : callable
        Euclidean projector onto the set.
    tol : float
        Membership tolerance: ``z`` is feasible when ``||project(z) - z|| <= tol``.
    """

    def __init__(self, project, tol=1e-9, name="set"):
        self._project = project
        self.tol = tol
        self.name = name

    def prox(self, gamma, z):
        return self._project(_vec(z))

    def evaluate(self, z):
        return 0.0 if self.in_domain(z) else np.inf

    def in_domain(self, z):
        z = _vec(z)
        return bool(np.linalg.norm(self._project(z) - z) <= self.tol * (1.0 + np.linalg.norm(z)))

    def __repr__(self):
        return f"SetIndicator({self.name})"


class BoxIndicator(ConvexTerm):
    """Indicator of ``{z : lo <= z <= hi}``; infinite bounds are allowed."""

    def __init__(self, lo, hi):
        lo = np.atleast_1d(_vec(lo))
        hi = np.atleast_1d(_vec(hi))
        if lo.shape != hi.shape:
            raise DimensionError(f"bound shapes differ: {lo.shape} vs {hi.shape}")
        if np.any(lo > hi):
            raise ParameterError("box requires lo <= hi in every coordinate")
        lo.setflags(write=False)
        hi.setflags(write=False)
        self.lo, self.hi = lo, hi

    def prox(self, gamma, z):
        return np.clip(_vec(z), self.lo, self.hi)

    def evaluate(self, z):
        return 0.0 if self.in_domain(z) else np.inf

    def in_domain(self, z):
        z = _vec(z)
        return bool(np.all(z >= self.lo) and np.all(z <= self.hi))

    def __repr__(self):
        return f"BoxIndicator(lo={self.lo.tolist()}, hi={self.hi.tolist()})"


def indicator_box(lo, hi):
    return BoxIndicator(lo, hi)


# --------------------------------------------------------------------------- problem


@dataclass(frozen=True)
class CompositeProblem:
    """The model ``min_x h(x) + g(S(x)) + φ(x)``.

    Attributes
    ----------
    grad_lipschitz : callable, optional
        ``mu ↦ L`` giving a Lipschitz constant of ``∇(h + ᵘg∘S)`` over dom φ,
        when the application knows one. Only used for diagnostics.
    subgradient : callable, optional
        ``x ↦ v`` returning an element of the limiting subdifferential of
        ``h + g∘S`` at ``x``, for the subgradient baseline.
    """

    h: SmoothTerm
    g: ProxFunction
    S: SmoothMap
    phi: ConvexTerm = field(default_factory=FreeTerm)
    grad_lipschitz: Optional[Callable[[float], float]] = None
    subgradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "composite"

    @property
    def d_in(self):
        return self.S.d_in

    @property
    def d_out(self):
        return self.S.d_out

    def check_point(self, x):
        x = _vec(x)
        if x.shape != (self.d_in,):
            raise DimensionError(f"expected a point of shape ({self.d_in},), got {x.shape}")
        return x

    def smoothed_value(self, mu, x):
        """``h(x) + ᵘg(S(x))`` (without φ)."""
        return self.h.value(x) + moreau_value(self.g, mu, self.S.value(x))

    def value(self, x):
        """``h(x) + g(S(x)) + φ(x)``."""
        return self.h.value(x) + self.g.evaluate(self.S.value(x)) + self.phi.evaluate(x)
