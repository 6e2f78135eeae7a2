"""Exception and warning types raised across the package."""


class PointBoxError(Exception):
    """Base class for all package errors."""


class EmptyCloud(PointBoxError, ValueError):
    pass


class BadCount(PointBoxError, ValueError):
    pass


class LengthMismatch(PointBoxError, ValueError):
    pass


class ShapeMismatch(PointBoxError, ValueError):
    pass


class NonScalarLoss(PointBoxError, ValueError):
    pass


class NonFiniteError(PointBoxError, FloatingPointError):
    pass


class MissingGrad(PointBoxError, RuntimeError):
    pass


class EmptyTemplate(PointBoxError, ValueError):
    pass


class EmptySearch(PointBoxError, ValueError):
    pass


class EmptyBatch(PointBoxError, ValueError):
    pass


class VersionMismatch(PointBoxError, ValueError):
    pass


class FrameCountMismatch(PointBoxError, ValueError):
    pass


class ConfigError(PointBoxError, ValueError):
    pass


class DatasetError(PointBoxError, OSError):
    pass


class DegenerateBatch(UserWarning):
    """A batch had no foreground seeds, so foreground-normalized terms are zero."""
