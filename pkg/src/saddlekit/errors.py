"""Exception hierarchy shared by the solvers and the harness."""


class SaddleError(Exception):
    """Base class for all package errors."""


class DimensionError(SaddleError, ValueError):
    """An oracle returned or received an array of the wrong shape."""

    def __init__(self, oracle, expected, got):
        self.oracle = oracle
        self.expected = expected
        self.got = got
        super().__init__(f"{oracle}: expected shape {expected}, got {got}")


class InfeasiblePointError(SaddleError, ValueError):
    """Both f2(x) and g2(y) are +inf, so the Lagrangian has no defined value."""


class UncertifiedConfigError(SaddleError, ValueError):
    """Parameters fall outside the window where a rate certificate holds."""


class NotConvergedError(SaddleError, RuntimeError):
    """An iteration budget ran out before the stopping certificate fired.

    ``result`` carries the best iterate found so far.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class DivergenceError(SaddleError, FloatingPointError):
    """An iterate became non-finite; ``state`` is the last finite one."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class InstanceError(SaddleError, ValueError):
    """An instance description or generator request cannot be realised."""
