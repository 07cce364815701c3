"""Exception hierarchy shared across the solver."""


class FokkerPlanckError(Exception):
    """Base class for all solver errors."""


class ConfigurationError(FokkerPlanckError):
    """Invalid configuration: bad parameters, unknown keys, missing pieces."""


class DomainError(FokkerPlanckError):
    """A point or field violates a domain requirement (outside Omega, nonpositive reference, ...)."""


class NotPositiveDefiniteError(FokkerPlanckError):
    """Diffusion matrix lost positive definiteness at an interior sample."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class NumericalEvaluationError(FokkerPlanckError):
    """A function evaluated to a non-finite value at a quadrature node."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class SolverError(FokkerPlanckError):
    """Linear solve failed (non-convergence or broken diagonal dominance)."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class StepDivergenceError(FokkerPlanckError):
    """NaN/Inf detected in a time-stepping stage."""

    def __init__(self, message, step_index=None, time=None):
        super().__init__(message)
        self.step_index = step_index
        self.time = time
