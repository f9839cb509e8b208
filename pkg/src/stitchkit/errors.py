"""Exception and warning types raised across stitchkit."""


class StitchError(Exception):
    """Base class for all stitchkit errors."""


class DegenerateProjection(StitchError):
    pass


class DegenerateBaseline(StitchError):
    pass


class InvalidSpec(StitchError, ValueError):
    pass


class BucketUnreachable(StitchError):
    pass


class InconsistentSample(StitchError):
    pass


class InsufficientOverlap(StitchError):
    pass


class DegenerateConfiguration(StitchError):
    pass


class AnchorOutOfCanvas(StitchError, ValueError):
    pass


class EmptyEvalRegion(StitchError):
    pass


class FormatError(StitchError):
    """Base class for file-format errors."""


class BadMagic(FormatError):
    pass


class TruncatedFile(FormatError):
    pass


class DimensionMismatch(FormatError):
    pass


# Non-fatal conditions: the affected term contributes 0 and a warning is emitted.
class EmptyRegion(UserWarning):
    pass


class EmptyMask(UserWarning):
    pass
