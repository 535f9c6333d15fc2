"""Two-stage pipeline scheduling designs on small clusters.

Library + CLI for generating synthetic image workloads, planning them onto a
cluster under three dispatch designs (per-item pipelines, late-binding shared
queue, early-binding balanced partitions), executing the plan on a virtual-time
simulator or a local-process backend, and analyzing the resulting event logs.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigurationError,
    DegenerateFitError,
    PlacementError,
    PlanningError,
    ProtocolError,
    TaskExecutionError,
)

__all__ = [
    "ConfigurationError",
    "DegenerateFitError",
    "PlacementError",
    "PlanningError",
    "ProtocolError",
    "TaskExecutionError",
    "__version__",
]
