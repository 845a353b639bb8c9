"""Exception types shared across the package."""


class SwarmPlanError(Exception):
    """Base class for all package-specific errors."""


class InvalidMatrixError(SwarmPlanError, ValueError):
    """A matrix argument is not symmetric positive-definite."""


class InvalidParameterError(SwarmPlanError, ValueError):
    """A scalar parameter is outside its admissible range."""


class WouldEmptyMixtureError(SwarmPlanError, ValueError):
    """Pruning at the requested threshold would remove every component."""


class InfeasibleMarginalsError(SwarmPlanError, ValueError):
    """Transport marginals do not sum to matching totals."""


class PlanInfeasibleError(SwarmPlanError, RuntimeError):
    """The sparsified planning LP has no feasible point."""

    def __init__(self, message, component_index=None):
        super().__init__(message)
        self.component_index = component_index


class PathInfeasibleError(SwarmPlanError, RuntimeError):
    """No path exists from a robot to its assigned target."""


class InfeasibleInitialDistributionError(SwarmPlanError, RuntimeError):
    """Rejection sampling of the initial swarm exhausted its attempt budget."""


class OutOfRangeError(SwarmPlanError, IndexError):
    """A step index lies outside the recorded trajectory."""
