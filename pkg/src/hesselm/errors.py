"""Exception hierarchy shared by every stage of the toolkit."""


class HessElmError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(HessElmError, ValueError):
    """Input violates a documented precondition."""


class DimensionError(ValidationError):
    """Array shapes do not agree."""


class SingularMatrixError(HessElmError, ArithmeticError):
    """A linear system is numerically singular."""


class ConvergenceError(HessElmError, ArithmeticError):
    """An iterative kernel did not converge."""


class DegenerateLeverageError(HessElmError, ArithmeticError):
    """A leverage value reached 1, so the leave-one-out residual is undefined."""


class TrainingError(HessElmError):
    """Training could not produce a model."""


class ModelFormatError(HessElmError, ValueError):
    """A persisted document is corrupt or unreadable."""


class FormatVersionError(ModelFormatError):
    """A persisted document was written by an unsupported format version."""
