"""Maxmin dispersion: place ``x ∈ C`` as far as possible from weighted points.

The task ``max_{x∈C} min_j w_j ||x - u_j||^2`` is solved in its equivalent form

    minimize  max_j ( -w_j ||x - u_j||^2 )  over  x ∈ C = V ∩ B(0, 1),

i.e. ``h ≡ 0``, ``g = max``, ``S(x) = -(w_j ||x - u_j||^2)_j`` and ``φ = ι_C``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParameterError
from .mathkit import SubspaceProjector, project_ball_subspace, random_subspace_projector
from .prox import CompositeProblem, MaxCoordinate, SetIndicator, SmoothMap, ZeroSmooth
from .rng import make_rng

__all__ = [
    "PROJECTOR_SEED_XOR",
    "DispersionInstance",
    "DispersionMap",
    "random_dispersion_instance",
    "build_dispersion_problem",
    "dispersion_cost",
    "dispersion_start",
]

#: The subspace of a trial is drawn from seed ``seed ^ PROJECTOR_SEED_XOR``.
PROJECTOR_SEED_XOR = 0x5DEECE66D


@dataclass(frozen=True)
class DispersionInstance:
    points: np.ndarray  # (m, d)
    weights: np.ndarray  # (m,)
    projector: SubspaceProjector
    seed: int = 0

    def __post_init__(self):
        pts = np.atleast_2d(np.array(self.points, dtype=np.float64))
        w = np.array(self.weights, dtype=np.float64).reshape(-1)
        if w.shape[0] != pts.shape[0]:
            raise DimensionError(f"{pts.shape[0]} points but {w.shape[0]} weights")
        if np.any(w <= 0):
            raise ParameterError("weights must be positive")
        if self.projector.dim != pts.shape[1]:
            raise DimensionError(f"projector acts on R^{self.projector.dim}, points live in R^{pts.shape[1]}")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def d(self):
        return self.points.shape[1]

    @property
    def m(self):
        return self.points.shape[0]


class DispersionMap(SmoothMap):
    """``x ↦ -(w_j ||x - u_j||^2)_j``."""

    def __init__(self, points, weights):
        self.points = points
        self.weights = weights
        self.d_out, self.d_in = points.shape

    def value(self, x):
        diff = x - self.points
        return -self.weights * np.einsum("ij,ij->i", diff, diff)

    def jacobian_adjoint(self, x, y):
        # -2 Σ_j y_j w_j (x - u_j)
        yw = np.asarray(y) * self.weights
        return -2.0 * (yw.sum() * x - yw @ self.points)


def random_dispersion_instance(d, m, d_v, seed):
    """Points uniform on ``[-2, 2]^d``, unit weights, random ``d_v``-dim subspace."""
    for name, val in (("d", d), ("m", m), ("d_v", d_v)):
        if int(val) != val or val < 1:
            raise ParameterError(f"{name} must be a positive integer, got {val}")
    if d_v > d:
        raise ParameterError(f"d_v={d_v} exceeds d={d}")
    rng = make_rng(seed)
    points = rng.uniform(-2.0, 2.0, size=(int(m), int(d)))
    projector = random_subspace_projector(int(d), int(d_v), make_rng(int(seed) ^ PROJECTOR_SEED_XOR))
    return DispersionInstance(points, np.ones(int(m)), projector, int(seed))


def build_dispersion_problem(inst):
    proj = inst.projector
    phi = SetIndicator(lambda z: project_ball_subspace(proj, z), tol=1e-9, name="V∩B(0,1)")
    S = DispersionMap(inst.points, inst.weights)
    return CompositeProblem(
        h=ZeroSmooth(),
        g=MaxCoordinate(),
        S=S,
        phi=phi,
        grad_lipschitz=_grad_lipschitz(inst),
        name="dispersion",
    )


def _grad_lipschitz(inst):
    # On C ⊂ B(0,1): ||DS(x)||_op <= 2 sqrt(Σ w_j^2 (1 + ||u_j||)^2) and DS is
    # 2 ||w||_2-Lipschitz; with ||∇ᵘg|| <= 1 and Lip(∇ᵘg) = 1/mu this gives
    # L(mu) = 2 ||w||_2 + ||DS||^2 / mu.
    w = inst.weights
    ds_bound = 2.0 * np.sqrt(np.sum(w**2 * (1.0 + np.linalg.norm(inst.points, axis=1)) ** 2))
    wn = float(np.linalg.norm(w))

    def lipschitz(mu):
        return 2.0 * wn + ds_bound**2 / mu

    return lipschitz


def dispersion_cost(inst, x):
    """``max_j -w_j ||x - u_j||^2`` (lower is better)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (inst.d,):
        raise DimensionError(f"expected shape ({inst.d},), got {x.shape}")
    diff = x - inst.points
    return float(np.max(-inst.weights * np.einsum("ij,ij->i", diff, diff)))


def dispersion_start(inst):
    """Default starting point: the origin, which lies in every ``V ∩ B(0,1)``."""
    return np.zeros(inst.d)
