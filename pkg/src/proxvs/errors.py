"""Exception types raised across the package."""


class ParameterError(ValueError):
    """A scalar parameter lies outside its admissible range."""


class DimensionError(ValueError):
    """Array shapes are empty or mutually inconsistent."""


class DomainError(ValueError):
    """A point lies outside the effective domain of the constraint term."""


class DivergenceError(RuntimeError):
    """Backtracking failed to find an acceptable stepsize."""


class SpecValidationError(ValueError):
    """An experiment specification failed validation.

    ``path`` names the offending field, e.g. ``"solver.c"``.
    """

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message
