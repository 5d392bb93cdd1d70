"""Exception types shared across the package."""


class InvariantViolation(ValueError):
    """A constructed object fails one of its structural invariants."""


class BasinError(ValueError):
    """Input lies outside the basin an iterative solver is certified for."""


class ConvergenceError(RuntimeError):
    """An iteration ran out of budget; carries the residual history."""

    def __init__(self, message, history=None, report=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []
        self.report = report


class SmallDivisorError(ValueError):
    """A cohomological solve hit a mode outside the rotation certificate."""

    def __init__(self, message, mode=None):
        super().__init__(message)
        self.mode = mode


class FrameDegenerateError(ValueError):
    """The moving frame of the right inverse degenerates somewhere."""


class CertificateError(ValueError):
    """A factorization certificate is malformed or fails verification."""
