"""Exception types shared across the pipeline."""


class MriSeqError(Exception):
    """Base class for all pipeline errors."""


class UnreadableFile(MriSeqError):
    """A volume file or slice file could not be read or decoded."""


class MixedSliceDimensions(MriSeqError):
    """A per-slice series contains slices with disagreeing height/width."""


class NotASequenceFile(MriSeqError):
    """A filename does not denote one of the four standardized sequence files."""


class InvalidDepth(MriSeqError):
    """Requested input depth n lies outside [1, 16]."""


class UnknownVariant(MriSeqError):
    """Requested dataset variant is not one of the five supported ones."""


class EmptySplit(MriSeqError):
    """A required manifest split contains no records."""


class DivergedLoss(MriSeqError):
    """Training loss became non-finite."""


class ChannelMismatch(MriSeqError):
    """Input channel count does not match the model configuration."""


class InvalidSteps(MriSeqError):
    """Integrated-gradients step count is below the minimum of 2."""


class UnsupportedArchitecture(MriSeqError):
    """Requested backbone is not one of the five supported architectures."""
