"""Exception types shared across the pipeline.

Everything raised on bad input derives from PipelineError so the CLI can
distinguish precondition failures (exit 2) from genuine bugs (exit 1).
"""


class PipelineError(Exception):
    """Base class for all expected, input-dependent failures."""


class ImageDecodeError(PipelineError):
    """File could not be decoded as a supported image format."""


class CropError(PipelineError):
    """Crop window misaligned or out of bounds."""


class SchemaError(PipelineError):
    """Feature CSV malformed: bad header, column count, or values."""


class ModelFormatError(PipelineError):
    """Model file corrupt, truncated, or of an unknown version."""


class ConvergenceError(PipelineError):
    """SVM trainer exhausted its pass budget before satisfying KKT."""

    def __init__(self, message: str, max_violation: float = float("nan")):
        super().__init__(message)
        self.max_violation = max_violation

    def __reduce__(self):
        return (ConvergenceError, (self.args[0], self.max_violation))


class ConfigError(PipelineError):
    """Experiment configuration file unreadable or inconsistent."""
