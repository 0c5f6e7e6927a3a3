"""Exception and warning types shared across the package."""


class EspritError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(EspritError, ValueError):
    """Shapes or indices are inconsistent with the requested operation."""


class DegenerateGapError(EspritError):
    """Two singular values at a truncation or weighting boundary coincide."""


class ConfigurationError(EspritError, ValueError):
    """A scenario, noise description or sweep file is invalid."""


class IllPosedError(EspritError):
    """A least-squares problem lacks the rank it needs."""


class UnsupportedVariantError(EspritError):
    """The requested estimator variant is not defined for this geometry."""


class AlignmentError(EspritError):
    """A column is orthogonal to its reference, so phase alignment is undefined."""


class ConditioningWarning(UserWarning):
    """An eigenvector basis is close to defective."""


class PairingWarning(UserWarning):
    """Cross-mode pairing left a large off-diagonal residual."""


class DegenerateGeometryError(IllPosedError):
    """A normal-equation matrix that must be inverted is singular."""
