"""Exception hierarchy.

``DataError`` subclasses signal bad input files or configuration and map to
CLI exit code 2. Everything else deriving from ``SemSlamError`` is a numeric
or usage failure raised by library operations.
"""


class SemSlamError(Exception):
    pass


class DataError(SemSlamError):
    pass


# geometry
class NonPositiveDepth(SemSlamError):
    pass


class DegenerateBaseline(SemSlamError):
    pass


class BehindCamera(SemSlamError):
    pass


# ground plane / scale
class TooFewPoints(SemSlamError):
    pass


class NoConsensus(SemSlamError):
    pass


class NonPositiveHeight(SemSlamError):
    pass


class UnknownKeyframe(SemSlamError, KeyError):
    pass


# refinement / tracking
class RasterSizeMismatch(SemSlamError):
    pass


class OutOfBounds(SemSlamError):
    pass


class TrackerFailure(SemSlamError):
    pass


# labels
class MalformedHeader(DataError):
    pass


class IllegalClassByte(DataError):
    pass


class SizeMismatch(DataError):
    pass


class OutOfFrame(SemSlamError):
    pass


class NoObservation(SemSlamError):
    pass


# pipeline / io
class OutOfOrderFrame(DataError):
    pass


class BadConfig(DataError):
    pass


class MalformedLine(DataError):
    pass


class NonRotationMatrix(DataError):
    pass


class EmptyOverlap(SemSlamError):
    pass


class EmptyLog(SemSlamError):
    pass
