"""Exception types shared across the library."""


class SpecmapError(Exception):
    """Base class for all specmap errors."""


class ConfigError(SpecmapError):
    """Invalid configuration or scenario parameters."""


class GridBoundsError(SpecmapError):
    """Voxel index outside the grid."""


class EstimationError(SpecmapError):
    """Interpolation cannot proceed (e.g. no samples)."""


class RecoveryError(SpecmapError):
    """Map recovery cannot proceed."""


class MetricError(SpecmapError):
    """Score undefined for the given inputs."""


class PlannerError(SpecmapError):
    """Sampling planner exhausted or misconfigured."""


class StageError(SpecmapError):
    """Pipeline failure tagged with the stage that raised it."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
