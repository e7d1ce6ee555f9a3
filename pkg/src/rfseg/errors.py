"""Exception hierarchy shared across the package."""


class RFSegError(Exception):
    """Base class for all rfseg errors."""


class ValidationError(RFSegError, ValueError):
    """Invalid argument or field value (bad range, bad shape, non-finite)."""


class ShapeError(ValidationError):
    """Array shape incompatible with the operation."""


class SceneFormatError(RFSegError):
    """Base class for scene container file problems."""


class BadMagicError(SceneFormatError):
    """File does not start with the expected magic bytes."""


class VersionMismatchError(SceneFormatError):
    """File declares an unsupported format version."""


class TruncatedFileError(SceneFormatError):
    """File ends before the declared payload is complete."""


class DimensionMismatchError(SceneFormatError):
    """Declared dimensions disagree with the payload or with each other."""


class CheckpointError(RFSegError):
    """Checkpoint file unreadable or incompatible."""


class ArchitectureMismatchError(CheckpointError):
    """Checkpoint was produced by a model with a different architecture."""


class NotFittedError(RFSegError):
    """Estimator used before fit() or before loading a checkpoint."""


class SessionError(RFSegError):
    """Invalid session operation (unknown id, empty history, busy writer)."""
