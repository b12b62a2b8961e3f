"""Exception types shared across the package."""


class ImaginaryResidueError(ValueError):
    """A tensor expected to be real carries too much imaginary energy.

    Raised when dropping the imaginary part would silently hide an
    inconsistency (e.g. a transform-domain tensor that is not
    conjugate-symmetric).
    """


class NumericalBreakdownError(RuntimeError):
    """The inference loop produced a state it cannot continue from
    (singular precision matrix, non-positive variance, ...)."""
