"""Exception types shared across the package."""


class PointmotError(Exception):
    """Base class for all engine errors."""


class SequenceFormatError(PointmotError):
    """A sequence directory or record violates the interchange contract.

    Carries the offending frame index and path when known so callers can
    report actionable messages.
    """

    def __init__(self, message: str, *, frame: int | None = None, path=None):
        self.frame = frame
        self.path = path
        prefix = ""
        if frame is not None:
            prefix += f"frame {frame}: "
        if path is not None:
            prefix += f"{path}: "
        super().__init__(prefix + message)


class TransformError(PointmotError):
    """Invalid or numerically unusable 4x4 transform."""


class EstimationError(PointmotError):
    """Alignment estimation cannot proceed (insufficient support)."""


class AssociationError(PointmotError):
    """Invalid input to a correspondence or assignment operation."""


class ConfigError(PointmotError):
    """Invalid configuration value or flag combination."""
