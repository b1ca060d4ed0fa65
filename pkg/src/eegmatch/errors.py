"""Exception types shared across the pipeline."""


class EegMatchError(ValueError):
    """Base class for all pipeline errors."""


class InvalidInputError(EegMatchError):
    """Input data violates a precondition (shape, emptiness, channel count)."""


class InvalidSpecError(EegMatchError):
    """A configuration object is inconsistent with the data it is applied to."""


class SampleRateMismatchError(EegMatchError):
    """Two streams or a stream and its filter disagree on sampling rate."""


class DegenerateChannelError(EegMatchError):
    """A channel is constant where nonzero variance is required."""


class UnknownLabelError(EegMatchError):
    """An alignment label is missing from the declared inventory."""


class TrainingDivergedError(EegMatchError):
    """Loss became non-finite during optimization."""


class DegenerateSampleError(EegMatchError):
    """A statistical sample is degenerate (e.g. all paired differences zero)."""
