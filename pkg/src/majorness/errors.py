"""Exception types shared across the package."""


class MajornessError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(MajornessError):
    """A record or payload violates its schema."""


class ParameterError(MajornessError):
    """An argument is outside its documented range."""


class StateError(MajornessError):
    """An operation was applied to an object in the wrong state."""


class InsufficientDataError(MajornessError):
    """Not enough data to compute the requested statistic."""


class UndefinedStatisticError(MajornessError):
    """The statistic is undefined for this input (e.g. zero variance)."""


class UndefinedInputError(MajornessError):
    """The operation has no defined value for this input (e.g. silence)."""


class ShapeError(MajornessError):
    """An array input does not match the shape the model expects."""


class UnsupportedFormatError(MajornessError):
    """The input bytes are not a format this package decodes."""


class DisconnectedGraphError(MajornessError):
    """The comparison graph splits into disjoint components."""

    def __init__(self, components):
        self.components = [sorted(c) for c in components]
        parts = "; ".join(",".join(c) for c in self.components)
        super().__init__(f"comparison graph is disconnected: [{parts}]")


class DivergenceError(MajornessError):
    """A fit cannot converge (e.g. an item with only wins and no regularization)."""


class TrainingDivergedError(MajornessError):
    """Training produced a non-finite loss."""


class StageError(MajornessError):
    """A pipeline stage is missing its prerequisites."""
