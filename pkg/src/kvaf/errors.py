"""Exception types raised by the toolkit."""


class KvafError(Exception):
    """Base class for all toolkit errors."""


class UrdfParseError(KvafError):
    """Malformed URDF XML (message carries line/column context)."""


class StructureError(KvafError):
    """Kinematic topology is cyclic or branches outside the gripper."""


class ValidationError(KvafError):
    """An invariant on parsed or loaded data does not hold."""


class DimensionError(KvafError):
    """A vector or sequence has the wrong length."""


class ShapeError(KvafError):
    """An array has an incompatible shape or non-divisible block factors."""


class EstimationError(KvafError):
    """A statistic could not be estimated (e.g. no visible keypoints)."""


class DegeneracyError(KvafError):
    """Input configuration is rank-deficient (e.g. collinear PnP points)."""


class LoadError(KvafError):
    """A file does not match its documented schema."""


class FillError(KvafError):
    """A track has no present frames to fill from."""
