"""Exception types shared across the package."""


class IvolnetError(Exception):
    """Base class for all package errors."""


class ConfigError(IvolnetError):
    """Invalid estimator or simulation configuration."""


class DomainError(IvolnetError):
    """Input outside the mathematical domain of an operation."""


class DimensionMismatch(IvolnetError):
    """Operands have incompatible matrix dimensions."""


class SingularFactorBlock(DomainError):
    """The factor block of a covariance matrix is not invertible."""


class TooFewObservations(IvolnetError):
    """Not enough observations for the requested statistic."""


class PanelTooShort(IvolnetError):
    """Return panel shorter than the estimator window requires."""


class NonPositiveThreshold(IvolnetError):
    """A truncation threshold came out zero, negative, or non-finite."""


class PathTooShort(IvolnetError):
    """Spot covariance path too short for the requested summation range."""


class MaskRangeError(IvolnetError):
    """Jump mask undefined on indices the estimator needs."""


class SingularFactorQuadCov(IvolnetError):
    """Estimated factor quadratic covariation matrix is singular."""


class NonpositiveDiagonal(IvolnetError):
    """A variance-type quadratic covariation estimate is not positive."""


class ZeroDenominator(IvolnetError):
    """Denominator of a ratio statistic is zero."""


class BlockTooShort(IvolnetError):
    """Spot block length too small (or too large) for the panel."""


class GridMismatch(IvolnetError):
    """Latent paths are not on a common grid."""


class EmptySession(IvolnetError):
    """No in-session observations for an asset-day."""


class NonmonotoneTimestamps(IvolnetError):
    """Tick timestamps are not non-decreasing."""
