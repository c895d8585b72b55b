"""Exception hierarchy shared by every module."""


class MimosecError(Exception):
    """Base class for all errors raised by this package."""


class ViolatedInvariant(MimosecError, ValueError):
    """A configuration or input invariant does not hold.

    The offending invariant is available as ``name``.
    """

    def __init__(self, name, message=None):
        self.name = name
        super().__init__(message or f"violated invariant: {name}")


class DimensionError(ViolatedInvariant):
    """Array or pilot dimensions are inconsistent."""

    def __init__(self, message, name="dimension"):
        super().__init__(name, message)


class ParameterError(MimosecError, ValueError):
    """A formula was called outside the parameter range where it holds."""


class AttackMismatch(MimosecError, ValueError):
    pass


class RegimeMismatch(MimosecError, ValueError):
    pass


class DegenerateEstimate(MimosecError, ValueError):
    pass


class ConvergenceError(MimosecError, RuntimeError):
    pass


class EmptyGrid(MimosecError, ValueError):
    pass


class UnknownFigure(MimosecError, ValueError):
    pass
