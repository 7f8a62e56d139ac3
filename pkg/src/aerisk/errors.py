"""Exception hierarchy. The CLI maps these onto exit codes."""


class AeriskError(Exception):
    """Base class for all library errors."""


class DataError(AeriskError, ValueError):
    """Input data violates the schema or a dataset invariant."""

    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"{message} at row {row}"
        super().__init__(message)


class ExclusionError(DataError):
    """An AE cannot enter a relative-effect analysis (e.g. zero probability in an arm)."""


class NumericalError(AeriskError, ArithmeticError):
    """A numerical procedure failed."""


class ConvergenceError(NumericalError):
    pass


class MonotoneLikelihoodError(NumericalError):
    """Cox partial likelihood has no finite maximiser.

    ``direction`` is ``+1`` when the hazard ratio diverges to infinity and
    ``-1`` when it collapses to zero.
    """

    def __init__(self, message, direction):
        self.direction = direction
        super().__init__(message)


class BootstrapError(NumericalError):
    pass


class SummaryValidationError(DataError):
    """A summary payload failed validation; ``errors`` lists ``(path, message)`` pairs."""

    def __init__(self, errors):
        self.errors = list(errors)
        text = "; ".join(f"{path}: {msg}" for path, msg in self.errors)
        super().__init__(f"invalid summary payload: {text}")
