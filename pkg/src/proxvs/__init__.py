"""Proximal variable smoothing for nonsmooth nonconvex composite problems.

Problems have the form ``minimize h(x) + g(S(x)) + φ(x)`` with ``h`` and ``S``
smooth, ``g`` weakly convex and Lipschitz with a cheap proximity operator, and
``φ`` a convex term with a cheap proximity operator. The solver replaces ``g``
by its Moreau envelope with a vanishing index and runs a single-loop
forward-backward iteration with backtracking.
"""

__version__ = "0.1.0"

from .errors import DimensionError, DivergenceError, DomainError, ParameterError, SpecValidationError
from .prox import CompositeProblem, MaxCoordinate, ScaledL1, ZeroFunction, moreau_gradient, moreau_value
from .solver import SolverConfig, SolveResult, StepsizeRule, Termination, solve, solve_subgradient

__all__ = [
    "__version__",
    "CompositeProblem",
    "MaxCoordinate",
    "ScaledL1",
    "ZeroFunction",
    "moreau_value",
    "moreau_gradient",
    "SolverConfig",
    "SolveResult",
    "StepsizeRule",
    "Termination",
    "solve",
    "solve_subgradient",
    "ParameterError",
    "DimensionError",
    "DomainError",
    "DivergenceError",
    "SpecValidationError",
]
