"""Proximal variable smoothing and the subgradient baseline.

The main entry point is :func:`solve`, a forward-backward iteration on the
time-varying surrogate ``F_n = h + ᵘⁿg∘S`` with ``mu_n`` decreasing along
:func:`~proxvs.prox.smoothing_schedule` and a backtracked stepsize accepted by a
sufficient-decrease test. Every iteration is logged as an
:class:`IterationRecord`.
"""

import enum
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np

from .errors import DivergenceError, DomainError, ParameterError
from .prox import check_mu, effective_eta, moreau_gradient, smoothing_schedule

__all__ = [
    "SolverConfig",
    "IterationRecord",
    "Termination",
    "SolveResult",
    "StepsizeRule",
    "smoothed_gradient",
    "smoothed_cost",
    "gradient_mapping",
    "stationarity_measure",
    "armijo_holds",
    "backtrack",
    "stopping_rule",
    "solve",
    "solve_subgradient",
    "MAX_SHRINKS",
    "SUBGRADIENT_MU",
]

log = logging.getLogger(__name__)

#: Backtracking gives up after this many stepsize reductions.
MAX_SHRINKS = 10_000
#: Smoothing index of the default subgradient selection.
SUBGRADIENT_MU = 1e-8


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of :func:`solve` and :func:`solve_subgradient`.

    Defaults are ``c = 2^-13``, ``rho = 1/2``, ``gamma_init = 1``, ``alpha = 3``,
    ``eps_stop = 1e-5`` and a 5 second budget.
    """

    c: float = 2.0**-13
    rho: float = 0.5
    gamma_init: float = 1.0
    alpha: float = 3.0
    eta_override: Optional[float] = None
    eps_stop: float = 1e-5
    time_limit_sec: float = 5.0
    max_iters: int = 1_000_000
    record_trace: bool = True

    def __post_init__(self):
        if not 0 < self.c < 1:
            raise ParameterError(f"c must lie in (0, 1), got {self.c}")
        if not 0 < self.rho < 1:
            raise ParameterError(f"rho must lie in (0, 1), got {self.rho}")
        if not self.gamma_init > 0:
            raise ParameterError(f"gamma_init must be positive, got {self.gamma_init}")
        if not self.alpha >= 1:
            raise ParameterError(f"alpha must be >= 1, got {self.alpha}")
        if self.eta_override is not None and not self.eta_override > 0:
            raise ParameterError(f"eta_override must be positive, got {self.eta_override}")
        if not self.eps_stop >= 0:
            raise ParameterError(f"eps_stop must be >= 0, got {self.eps_stop}")
        if not self.time_limit_sec > 0:
            raise ParameterError(f"time_limit_sec must be positive, got {self.time_limit_sec}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ParameterError(f"max_iters must be a positive integer, got {self.max_iters}")


@dataclass(frozen=True)
class IterationRecord:
    """Quantities observed at iteration ``n``.

    ``cost_smoothed`` is ``(F_n + φ)(x_n)``, ``cost_true`` is ``(F + φ)(x_n)``,
    ``measure`` is the gradient-mapping norm of ``F_n`` at ``x_n`` for the
    reference stepsize ``gamma_init`` and ``step_norm`` is ``||x_{n+1} - x_n||``.
    """

    n: int
    mu: float
    gamma: float
    backtrack_count: int
    cost_smoothed: float
    cost_true: float
    measure: float
    step_norm: float

    def to_dict(self):
        return asdict(self)


class Termination(str, enum.Enum):
    TOLERANCE = "ToleranceReached"
    TIME_LIMIT = "TimeLimit"
    MAX_ITERS = "MaxIters"


@dataclass
class SolveResult:
    x_final: np.ndarray
    trace: List[IterationRecord]
    termination: Termination
    iterations: int
    elapsed_sec: float
    final_cost: float = math.nan
    warnings: List[str] = field(default_factory=list)

    @property
    def final_measure(self):
        return self.trace[-1].measure if self.trace else math.nan


# --------------------------------------------------------------------------- pieces


def _model(p, mu, x):
    """Return ``(F_mu(x), ∇F_mu(x), F(x))`` sharing one evaluation of ``S``."""
    sx = p.S.value(x)
    pz = p.g.prox(mu, sx)
    gz = (sx - pz) / mu
    hx, hgrad = p.h.value_and_gradient(x)
    fx = hx + p.g.evaluate(pz) + float(gz @ gz) * (mu / 2.0)
    grad = hgrad + p.S.jacobian_adjoint(x, gz)
    true = hx + p.g.evaluate(sx)
    return fx, grad, true


def smoothed_cost(p, mu, x):
    """``(F_mu + φ)(x)`` with ``F_mu = h + ᵘg∘S``."""
    check_mu(p.g, mu)
    return p.smoothed_value(mu, x) + p.phi.evaluate(x)


def smoothed_gradient(p, mu, x):
    """Gradient ``∇h(x) + DS(x)^*[∇ᵘg(S(x))]`` of the smoothed surrogate."""
    x = p.check_point(x)
    check_mu(p.g, mu)
    return p.h.gradient(x) + p.S.jacobian_adjoint(x, moreau_gradient(p.g, mu, p.S.value(x)))


def gradient_mapping(p, mu, gamma, x):
    """Forward-backward residual ``(x - prox_{γφ}(x - γ∇F_mu(x))) / γ``."""
    if not gamma > 0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    x = p.check_point(x)
    grad = smoothed_gradient(p, mu, x)
    return (x - p.phi.prox(gamma, x - gamma * grad)) / gamma


def stationarity_measure(p, mu, gamma, x):
    """Norm of :func:`gradient_mapping`."""
    return float(np.linalg.norm(gradient_mapping(p, mu, gamma, x)))


def _armijo_ok(lhs, rhs):
    return lhs <= rhs + 1e-12 * (1.0 + abs(lhs))


def _armijo_test(p, mu, x, grad, fx, gamma, c):
    cand = p.phi.prox(gamma, x - gamma * grad)
    meas = float(np.linalg.norm(x - cand)) / gamma
    lhs = p.smoothed_value(mu, cand) + p.phi.evaluate(cand)
    rhs = fx - c * gamma * meas * meas
    return _armijo_ok(lhs, rhs), cand


def armijo_holds(p, mu, x, gamma, c):
    """Sufficient-decrease test for stepsize ``gamma`` at ``x``.

    Compares ``(F_mu+φ)(prox_{γφ}(x - γ∇F_mu(x)))`` against
    ``(F_mu+φ)(x) - c γ M_γ(x)^2`` with a relative roundoff slack of
    ``1e-12 (1 + |lhs|)``.
    """
    x = p.check_point(x)
    if not p.phi.in_domain(x):
        raise DomainError("armijo_holds requires x in dom φ")
    check_mu(p.g, mu)
    fx, grad, _ = _model(p, mu, x)
    fx += p.phi.evaluate(x)
    return _armijo_test(p, mu, x, grad, fx, gamma, c)[0]


def _backtrack(p, mu, x, grad, fx, cfg):
    gamma = cfg.gamma_init
    for count in range(MAX_SHRINKS + 1):
        ok, cand = _armijo_test(p, mu, x, grad, fx, gamma, cfg.c)
        if ok:
            return gamma, count, cand
        gamma *= cfg.rho
        if gamma == 0.0:
            break
    raise DivergenceError(
        f"no acceptable stepsize after {count} reductions (mu={mu:.3e}); "
        "check the gradient and the Lipschitz assumptions"
    )


def backtrack(p, mu, x, cfg):
    """Largest ``gamma_init * rho**l`` (``l >= 0``) passing :func:`armijo_holds`.

    ``l = 0`` is tested first. Returns ``(gamma, l)``.

    Raises
    ------
    DivergenceError
        After :data:`MAX_SHRINKS` failed reductions.
    """
    x = p.check_point(x)
    if not p.phi.in_domain(x):
        raise DomainError("backtrack requires x in dom φ")
    check_mu(p.g, mu)
    fx, grad, _ = _model(p, mu, x)
    fx += p.phi.evaluate(x)
    gamma, count, _ = _backtrack(p, mu, x, grad, fx, cfg)
    return gamma, count


def stopping_rule(step_norm, elapsed_sec, cfg, n=None):
    """True when the step is below ``eps_stop``, time ran out, or ``n`` hit the cap."""
    return (
        step_norm < cfg.eps_stop
        or elapsed_sec > cfg.time_limit_sec
        or (n is not None and n >= cfg.max_iters)
    )


def _termination(step_norm, elapsed, n, cfg):
    if step_norm < cfg.eps_stop:
        return Termination.TOLERANCE
    if elapsed > cfg.time_limit_sec:
        return Termination.TIME_LIMIT
    if n >= cfg.max_iters:
        return Termination.MAX_ITERS
    return None


def _start(p, x1):
    x = p.check_point(np.array(x1, dtype=np.float64))
    warnings = []
    if not p.phi.in_domain(x):
        x = p.phi.prox(1.0, x)
        msg = "initial point outside dom φ; replaced by its projection"
        log.warning(msg)
        warnings.append(msg)
    return x, warnings


# --------------------------------------------------------------------------- algorithms


def solve(p, x1, cfg=SolverConfig(), callback=None):
    """Minimize ``h + g∘S + φ`` by proximal variable smoothing.

    Parameters
    ----------
    p : CompositeProblem
    x1 : array_like
        Starting point. Should lie in dom φ; otherwise it is projected first and
        a warning is attached to the result.
    cfg : SolverConfig
    callback : callable, optional
        Called as ``callback(record, x_next)`` after every iteration.

    Returns
    -------
    SolveResult
    """
    x, warnings = _start(p, x1)
    eta = effective_eta(p.g, cfg.eta_override)
    gamma_bar = cfg.gamma_init
    trace = []
    t0 = time.perf_counter()
    n = 0
    while True:
        n += 1
        mu = smoothing_schedule(n, eta, cfg.alpha)
        fx, grad, true = _model(p, mu, x)
        phix = p.phi.evaluate(x)
        fx += phix
        if not math.isfinite(fx):
            raise DivergenceError(f"non-finite smoothed cost at iteration {n}")
        gamma, count, x_next = _backtrack(p, mu, x, grad, fx, cfg)
        ref = p.phi.prox(gamma_bar, x - gamma_bar * grad)
        measure = float(np.linalg.norm(x - ref)) / gamma_bar
        step = float(np.linalg.norm(x_next - x))
        rec = IterationRecord(n, mu, gamma, count, fx, true + phix, measure, step)
        if cfg.record_trace or not trace:
            trace.append(rec)
        else:
            trace[-1] = rec
        if callback is not None:
            callback(rec, x_next)
        x = x_next
        elapsed = time.perf_counter() - t0
        reason = _termination(step, elapsed, n, cfg)
        if reason is not None:
            return SolveResult(x, trace, reason, n, elapsed, p.value(x), warnings)


@dataclass(frozen=True)
class StepsizeRule:
    """Diminishing stepsizes for the subgradient method.

    ``kind`` is one of ``"eta_sqrt"`` (``n^-1/2 / eta_sub``), ``"inv_sqrt"``
    (``n^-1/2``) or ``"inv"`` (``1/n``).
    """

    kind: str
    eta_sub: float = 1.0

    KINDS = ("eta_sqrt", "inv_sqrt", "inv")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ParameterError(f"unknown stepsize rule {self.kind!r}; expected one of {self.KINDS}")
        if not self.eta_sub > 0:
            raise ParameterError(f"eta_sub must be positive, got {self.eta_sub}")

    @classmethod
    def eta_sqrt(cls, eta_sub):
        return cls("eta_sqrt", float(eta_sub))

    @classmethod
    def inv_sqrt(cls):
        return cls("inv_sqrt")

    @classmethod
    def inv(cls):
        return cls("inv")

    def __call__(self, n):
        if self.kind == "eta_sqrt":
            return n**-0.5 / self.eta_sub
        if self.kind == "inv_sqrt":
            return n**-0.5
        return 1.0 / n


def solve_subgradient(p, x1, rule, cfg=SolverConfig(), selector=None):
    """Projected subgradient iteration ``x ← prox_{γφ}(x - γ v)``.

    ``v`` comes from ``selector(x)``, else ``p.subgradient``, else the smoothed
    gradient with the tiny index :data:`SUBGRADIENT_MU`. Records use
    ``mu = SUBGRADIENT_MU``, ``cost_smoothed = cost_true`` and report as
    ``measure`` the residual norm at ``gamma_init`` for the selected ``v``.
    """
    x, warnings = _start(p, x1)
    if selector is None:
        selector = p.subgradient
    if selector is None:
        selector = lambda z: smoothed_gradient(p, SUBGRADIENT_MU, z)  # noqa: E731
    gamma_bar = cfg.gamma_init
    trace = []
    t0 = time.perf_counter()
    n = 0
    while True:
        n += 1
        gamma = rule(n)
        v = np.asarray(selector(x), dtype=np.float64)
        cost = p.value(x)
        x_next = p.phi.prox(gamma, x - gamma * v)
        measure = float(np.linalg.norm(x - p.phi.prox(gamma_bar, x - gamma_bar * v))) / gamma_bar
        step = float(np.linalg.norm(x_next - x))
        rec = IterationRecord(n, SUBGRADIENT_MU, gamma, 0, cost, cost, measure, step)
        if cfg.record_trace or not trace:
            trace.append(rec)
        else:
            trace[-1] = rec
        x = x_next
        elapsed = time.perf_counter() - t0
        reason = _termination(step, elapsed, n, cfg)
        if reason is not None:
            return SolveResult(x, trace, reason, n, elapsed, p.value(x), warnings)
