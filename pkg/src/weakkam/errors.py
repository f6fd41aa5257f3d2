class WeakKamError(Exception):
    """Base class for failures raised by the library."""


class PreconditionError(WeakKamError, ValueError):
    """An operation was called outside its hypotheses (e.g. alpha vanishing on the Aubry set)."""


class ConvergenceError(WeakKamError, RuntimeError):
    """An iterative procedure hit its iteration cap.

    ``trace`` holds the residual history for diagnosis.
    """

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)


class DiagnosticError(WeakKamError, RuntimeError):
    """A structural check failed (empty Aubry set, empty tight graph, ...)."""
