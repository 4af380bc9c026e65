"""Exception types shared across the package."""


class Krotov2Error(Exception):
    """Base class for all package-specific errors."""


class GridError(Krotov2Error):
    """Invalid time grid construction or mismatched grids."""


class FieldError(Krotov2Error):
    """Invalid control field data (shape mismatch, bad weights, S=0 clash)."""


class StateError(Krotov2Error):
    """Invalid state set construction (duplicate index, dimension clash)."""


class OperatorError(Krotov2Error):
    """Invalid dense operator (hermiticity violation, dimension clash)."""


class PropagationError(Krotov2Error):
    """Propagator failure, carrying the offending step index when known."""

    def __init__(self, message, step_index=None):
        super().__init__(message)
        self.step_index = step_index


class ChebyshevConvergenceError(PropagationError):
    """Chebyshev expansion of the step propagator did not converge."""


class FunctionalError(Krotov2Error):
    """Inconsistent functional inputs (subspace mismatch, bad exponent)."""


class BoundUnavailableError(Krotov2Error):
    """A required supremum bound is missing on a nonlinear specification."""


class DivergenceError(Krotov2Error):
    """Optimization produced a non-finite functional value.

    Carries the record accumulated up to the last good iteration.
    """

    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record


class ConfigError(Krotov2Error):
    """Invalid run configuration."""
