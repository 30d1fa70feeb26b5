"""Named errors raised across the key-pose pipeline.

Every error derives from :class:`KeyPoseError` so callers (and the command
line front-end) can separate data problems from programming mistakes.
"""


class KeyPoseError(Exception):
    """Base class for all data errors raised by this package."""


class DegenerateConfiguration(KeyPoseError):
    """All joints of a configuration coincide; the annotation is unusable."""


class ImageTooSmall(KeyPoseError):
    pass


class OutOfBounds(KeyPoseError):
    pass


class DimensionMismatch(KeyPoseError):
    pass


class EmptyClass(KeyPoseError):
    pass


class NoValidPlacement(KeyPoseError):
    pass


class InsufficientPairs(KeyPoseError):
    pass


class InsufficientActivations(KeyPoseError):
    pass


class InsufficientSamples(KeyPoseError):
    pass


class GroundTruthOutsideInterval(KeyPoseError):
    pass


class NoCandidates(KeyPoseError):
    pass


class AnnotationNotCovered(KeyPoseError):
    pass


class MisalignedSeries(KeyPoseError):
    pass


class InvalidSpec(KeyPoseError):
    pass


class InvalidConfig(KeyPoseError):
    pass


class FormatError(KeyPoseError):
    """A file is missing, unreadable or does not follow its declared format."""


class MissingModel(KeyPoseError):
    """Prediction was asked for without a fitted key-pose model file."""
