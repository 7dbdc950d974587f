"""Exception hierarchy shared by every cloudsort module."""


class CloudsortError(Exception):
    """Base class for all pipeline errors."""


# point clouds / PCD files
class PCDError(CloudsortError):
    pass


class MalformedHeader(PCDError):
    pass


class UnsupportedEncoding(PCDError):
    pass


class FieldMismatch(PCDError):
    pass


class EmptyCloud(CloudsortError, ValueError):
    pass


class TooFewPoints(CloudsortError, ValueError):
    pass


# segmentation
class NoValidSample(CloudsortError):
    pass


class IndexOutOfRange(CloudsortError, IndexError):
    pass


class EmptyAfterCrop(CloudsortError):
    pass


# descriptor geometry
class CoincidentPoint(CloudsortError, ValueError):
    pass


class ParallelDirection(CloudsortError, ValueError):
    pass


class ZeroCentroid(CloudsortError, ValueError):
    pass


class AllCoincident(CloudsortError, ValueError):
    pass


# classifier / evaluation
class SingleClass(CloudsortError, ValueError):
    pass


class DimensionMismatch(CloudsortError, ValueError):
    pass


class MalformedModel(CloudsortError):
    pass


class LengthMismatch(CloudsortError, ValueError):
    pass


class UnknownLabel(CloudsortError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class InsufficientFrames(CloudsortError):
    pass


class WrongVideoCount(CloudsortError):
    pass


# kinematics
class Unreachable(CloudsortError):
    pass


class NoSolutions(CloudsortError, ValueError):
    pass
