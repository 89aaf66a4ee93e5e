"""Exception hierarchy shared across the package."""


class SoftReluError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(SoftReluError, ValueError):
    pass


class GenerationFailed(SoftReluError):
    pass


class EmptyProbeSet(SoftReluError, ValueError):
    pass


class RankDeficient(SoftReluError):
    pass


class NotPD(SoftReluError):
    """A matrix expected to be positive definite failed the check or factorization."""


class DegenerateC(SoftReluError):
    pass


class InvalidRange(SoftReluError, ValueError):
    pass


class ConvergenceFailure(SoftReluError):
    """No restart of the reference solver reached the requested gradient norm."""
