"""Exception types shared across the package."""


class SitwatchError(ValueError):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(SitwatchError):
    """An argument violates a documented precondition (non-finite, too short, ...)."""


class DegenerateGravityError(SitwatchError):
    """Acceleration magnitude too small for any orientation to be recoverable."""


class InvalidRotationError(SitwatchError):
    """A matrix fails the orthonormality / determinant checks for a rotation."""


class LayoutMismatchError(SitwatchError):
    """Feature layout (version, groups or width) differs from what a model expects."""


class DegenerateTrainingError(SitwatchError):
    """Training inputs cannot produce a classifier (e.g. a single label class)."""


class CsvFormatError(SitwatchError):
    """A CSV file violates its documented schema."""
