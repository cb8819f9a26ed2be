"""Exception hierarchy shared by every stage of the codec."""


class CodecError(ValueError):
    """Base class for all data errors raised by gsgc."""


# PLY layer
class MalformedHeader(CodecError):
    pass


class MissingPosition(CodecError):
    pass


class TruncatedPayload(CodecError):
    pass


class NonFiniteCoordinate(CodecError):
    pass


class InvalidCloud(CodecError):
    pass


# Morton / grid layer
class CoordinateOutOfRange(CodecError):
    pass


class DepthOutOfRange(CodecError):
    pass


class DepthOverflow(DepthOutOfRange):
    """The requested step needs more than 21 levels."""


class KeyOutOfRange(CodecError):
    pass


class LengthMismatch(CodecError):
    pass


class EmptyCloud(CodecError):
    pass


class OutOfRange(CodecError):
    """A point falls outside the quantization grid."""


# Entropy coding
class InputExhausted(CodecError):
    """The decoder needed more bytes than the stream holds."""


class CorruptPayload(CodecError):
    pass


# Container
class BadMagic(CodecError):
    pass


class UnsupportedVersion(CodecError):
    pass


class ChecksumMismatch(CodecError):
    pass


# Verification
class NonUniqueVoxels(CodecError):
    pass
