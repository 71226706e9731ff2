"""Exception hierarchy shared by every module.

Three branches map onto the CLI exit-code contract: UsageError -> 1,
DataError -> 2, NumericError -> 3.
"""


class PipelineError(Exception):
    pass


class UsageError(PipelineError):
    pass


class DataError(PipelineError):
    pass


class NumericError(PipelineError):
    pass


# tensor core
class ZeroDim(DataError):
    pass


class RankOutOfRange(DataError):
    pass


class ShapeMismatch(DataError):
    pass


class IoError(DataError):
    pass


class BadMagic(DataError):
    pass


class TruncatedPayload(DataError):
    pass


# convolution / layers
class EmptyOutput(DataError):
    pass


class ThetaOutOfRange(DataError):
    pass


class LabelOutOfRange(DataError):
    pass


# rank pooling / flow / data pipeline
class EmptySequence(DataError):
    pass


class WindowTooLarge(DataError):
    pass


class NonContiguousIndices(DataError):
    pass


class UnsupportedPixelFormat(DataError):
    pass


class CropTooLarge(DataError):
    pass


class ClipTooLong(DataError):
    pass


# network / training
class ShapeComposeError(DataError):
    pass


class EmptyDataset(DataError):
    pass


class OrderMismatch(DataError):
    pass


class UnknownSubcommand(UsageError):
    pass
