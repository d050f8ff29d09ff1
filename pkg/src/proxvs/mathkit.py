"""Linear-algebra and projection helpers used by the applications.

Everything here is a pure function of its inputs. Randomized constructors take
a ``numpy.random.Generator`` (or an integer seed, which is turned into one via
:func:`proxvs.rng.make_rng`) and never touch global random state.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParameterError
from .rng import make_rng

__all__ = [
    "SubspaceProjector",
    "project_simplex",
    "random_subspace_projector",
    "project_ball",
    "project_ball_subspace",
    "symmetric_sqrt",
    "project_regular_polygon",
]


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SubspaceProjector:
    """Orthogonal projector ``P`` onto a linear subspace ``V`` of R^d.

    Attributes
    ----------
    matrix : ndarray, shape (d, d)
        Symmetric idempotent matrix with ``matrix @ x = P_V x``.
    rank : int
        ``dim V``.
    """

    matrix: np.ndarray
    rank: int

    def __post_init__(self):
        m = _frozen(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"projector must be square, got shape {m.shape}")
        if not 1 <= self.rank <= m.shape[0]:
            raise ParameterError(f"rank must lie in [1, {m.shape[0]}], got {self.rank}")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self):
        return self.matrix.shape[0]

    def __call__(self, z):
        return self.matrix @ np.asarray(z, dtype=np.float64)

    @classmethod
    def identity(cls, d):
        return cls(np.eye(d), d)


def project_simplex(v):
    """Euclidean projection of ``v`` onto the unit simplex.

    Sort-and-threshold method: find the largest ``k`` with
    ``u_k > (sum_{i<=k} u_i - 1) / k`` for ``u`` sorted in decreasing order,
    then shift and clip.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise DimensionError("project_simplex expects a non-empty 1-D array")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, v.size + 1)
    k = np.nonzero(u - css / ks > 0)[0][-1]
    tau = css[k] / (k + 1)
    return np.maximum(v - tau, 0.0)


def random_subspace_projector(d, d_v, rng):
    """Projector onto the span of ``d_v`` random Gaussian directions in R^d.

    Draws a ``d x d_v`` standard normal matrix, orthonormalizes it with an
    economy Householder QR (signs fixed so ``diag(R) >= 0``) and returns
    ``Q Q^T``. A numerically rank-deficient draw is discarded and redrawn from
    the same generator.
    """
    if not (isinstance(d, (int, np.integer)) and isinstance(d_v, (int, np.integer))):
        raise ParameterError("d and d_v must be integers")
    if d < 1 or not 1 <= d_v <= d:
        raise ParameterError(f"need 1 <= d_v <= d, got d={d}, d_v={d_v}")
    rng = make_rng(rng)
    for _ in range(100):
        a = rng.standard_normal((d, d_v))
        q, r = np.linalg.qr(a, mode="reduced")
        diag = np.diag(r)
        if np.min(np.abs(diag)) >= 1e-12:
            break
    else:  # pragma: no cover - probability zero
        raise RuntimeError("could not draw a full-rank Gaussian matrix")
    q = q * np.where(diag < 0, -1.0, 1.0)
    p = q @ q.T
    # exact symmetry; QR roundoff leaves ~1e-17 asymmetry otherwise
    p = 0.5 * (p + p.T)
    return SubspaceProjector(p, int(d_v))


def project_ball(z, radius=1.0):
    """Projection onto the closed Euclidean ball of the given radius."""
    z = np.asarray(z, dtype=np.float64)
    nrm = np.linalg.norm(z)
    if nrm <= radius:
        return z.copy()
    return z * (radius / nrm)


def project_ball_subspace(projector, z):
    """Projection onto ``V ∩ B(0, 1)`` computed as ball projection after ``P_V``."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (projector.dim,):
        raise DimensionError(f"expected shape ({projector.dim},), got {z.shape}")
    return project_ball(projector(z))


def symmetric_sqrt(r):
    """Principal square root of a symmetric positive semidefinite matrix.

    Eigenvalues down to ``-1e-10`` are treated as roundoff and clipped to zero.

    Raises
    ------
    ParameterError
        If ``r`` is not symmetric or has a clearly negative eigenvalue.
    """
    r = np.asarray(r, dtype=np.float64)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {r.shape}")
    scale = 1.0 + np.linalg.norm(r)
    if np.linalg.norm(r - r.T) > 1e-12 * scale:
        raise ParameterError("symmetric_sqrt requires a symmetric matrix")
    w, v = np.linalg.eigh(0.5 * (r + r.T))
    if w.size and w.min() < -1e-10:
        raise ParameterError(f"matrix is not positive semidefinite (min eigenvalue {w.min():.3e})")
    a = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T
    return 0.5 * (a + a.T)


def project_regular_polygon(M, z2):
    """Project points of R^2 onto the convex hull of the M-th roots of unity.

    Parameters
    ----------
    M : int
        Number of vertices ``exp(2 pi i m / M)``. ``M == 2`` gives the segment
        ``[-1, 1] x {0}`` and ``M == 1`` the single point ``(1, 0)``.
    z2 : array_like, shape (2,) or (n, 2)
        Points to project; rows are projected independently.

    Returns
    -------
    ndarray
        Projected points, same shape as ``z2``.
    """
    if M < 1:
        raise ParameterError(f"M must be >= 1, got {M}")
    z = np.asarray(z2, dtype=np.float64)
    single = z.ndim == 1
    z = np.atleast_2d(z)
    if z.shape[-1] != 2:
        raise DimensionError(f"expected points in R^2, got shape {np.shape(z2)}")
    if M == 1:
        out = np.zeros_like(z)
        out[:, 0] = 1.0
    elif M == 2:
        out = np.stack([np.clip(z[:, 0], -1.0, 1.0), np.zeros(len(z))], axis=1)
    else:
        step = 2.0 * np.pi / M
        ang = np.mod(np.arctan2(z[:, 1], z[:, 0]), 2.0 * np.pi)
        k = np.minimum(np.floor(ang / step), M - 1)
        a = np.stack([np.cos(k * step), np.sin(k * step)], axis=1)
        b = np.stack([np.cos((k + 1) * step), np.sin((k + 1) * step)], axis=1)
        mid = (k + 0.5) * step
        normal = np.stack([np.cos(mid), np.sin(mid)], axis=1)
        inside = np.einsum("ij,ij->i", normal, z) <= np.cos(np.pi / M)
        e = b - a
        t = np.einsum("ij,ij->i", z - a, e) / np.einsum("ij,ij->i", e, e)
        edge_pt = a + np.clip(t, 0.0, 1.0)[:, None] * e
        out = np.where(inside[:, None], z, edge_pt)
    return out[0] if single else out
