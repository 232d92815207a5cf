"""Exception types shared across the pipeline."""


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


# audio decoding / embedding
class UnreadableFile(PipelineError):
    """Audio or embedding file is corrupt, truncated, or not a supported container."""


class EmptyAudio(PipelineError):
    """Decoded audio contains zero samples."""


class BackendFailure(PipelineError):
    """Embedding backend raised during inference."""


class DimensionMismatch(PipelineError):
    """Vector/matrix dimension differs from the declared one."""


class EmptyMatrix(PipelineError):
    """Embedding matrix has no rows."""


# feature preparation / datasets
class TooFewSamples(PipelineError):
    """Not enough samples to fit the scaler."""


class MissingId(PipelineError):
    """A fold split references an id absent from the dataset manifest."""


class LabelMissing(PipelineError):
    """A training/validation id has no label."""


class MissingFeatures(PipelineError):
    """Feature file referenced by the manifest cannot be found."""


# forest training / model files
class SingleClassData(PipelineError):
    """Training data contains only one class."""


class NaNFeature(PipelineError):
    """Feature matrix contains NaN or Inf."""


class CorruptModelFile(PipelineError):
    """Model file cannot be parsed."""


class VersionMismatch(PipelineError):
    """Model file was written by an unknown format version."""


# metrics
class SingleClassLabels(PipelineError):
    """ROC-style metrics need at least one positive and one negative label."""


class Unattainable(PipelineError):
    """No grid threshold reaches the requested sensitivity target."""


# projection
class DegenerateDistances(PipelineError):
    """A point is at distance zero from every other point."""
