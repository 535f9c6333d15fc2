"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid generator, cluster, model, or experiment configuration."""


class PlanningError(ValueError):
    """A workload cannot be planned onto the given cluster (e.g. infeasible plan)."""


class PlacementError(RuntimeError):
    """Resource accounting violation: bad allocate/release against a node."""


class ProtocolError(RuntimeError):
    """Task-queue protocol violation (push after disconnect, pull after Empty, ...)."""


class DegenerateFitError(ValueError):
    """Fit requested on data that cannot identify a line (fewer than two distinct x)."""


class TaskExecutionError(RuntimeError):
    """A task process failed in the local backend; carries the partial event log."""

    def __init__(self, message, log=None):
        super().__init__(message)
        self.log = log
