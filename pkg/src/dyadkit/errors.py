"""Exception types shared across the toolkit."""


class DyadkitError(Exception):
    """Base class for all toolkit errors."""


class CaptureError(DyadkitError):
    """A capture file is malformed (bad line, bad record, bad magic)."""


class LabelError(CaptureError):
    """A capture record carries an unknown interaction label."""


class SampleValidationError(DyadkitError):
    """A sample breaks a structural invariant (e.g. wrong frame count)."""


class LayoutError(DyadkitError):
    """An encoded tensor violates its layout contract (nonzero padding)."""


class ShapeError(DyadkitError):
    """A model received an input of the wrong form or shape."""


class TrainingError(DyadkitError):
    """Training diverged (non-finite loss)."""


class PipelineError(DyadkitError):
    """A pipeline stage is missing a required upstream artifact."""


class ConfigError(DyadkitError):
    """A configuration value is inconsistent or unusable."""
