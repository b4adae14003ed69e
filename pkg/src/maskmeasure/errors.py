"""Exception types raised by the measurement pipeline."""


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


class EmptyMaskError(PipelineError):
    """Mask contains no foreground pixels (or nothing survived filtering)."""


class DegenerateMaskError(PipelineError):
    """Mask has too little structure for axis estimation (e.g. a single pixel)."""


class NoPathError(PipelineError):
    """No traversable trunk path exists between skeleton endpoints."""


class DegenerateSlopeError(PipelineError):
    """Slope undefined: both finite-difference points coincide."""


class NoStationDepthError(PipelineError):
    """Reference depth at a station could not be recovered."""


class BadDepthError(PipelineError):
    """Depth value is missing, zero, negative, or non-finite."""


class NoConvergenceError(PipelineError):
    """Iterative undistortion failed to converge."""


class NoValidSegmentsError(PipelineError):
    """Every station was dropped; nothing to measure."""


class TooFewStationsError(PipelineError):
    """Operation needs more stations than the report provides."""


class DimensionMismatchError(PipelineError):
    """Mask and depth map dimensions disagree."""


class OutOfViewError(PipelineError):
    """Synthetic object does not fit inside the camera frustum."""


class ConfigError(PipelineError):
    """Invalid configuration value."""


class StageError(PipelineError):
    """Wraps an error with the pipeline stage it occurred in."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause
