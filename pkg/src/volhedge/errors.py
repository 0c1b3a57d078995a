"""Exception hierarchy shared by all volhedge modules."""


class VolhedgeError(Exception):
    """Base class for all library errors."""


class ConfigError(VolhedgeError):
    """Invalid, missing or unknown configuration key."""


class ModelParameterError(VolhedgeError):
    """Model constructed with a parameter outside its admissible range."""


class UnsupportedKernelError(VolhedgeError):
    """Analytic kernel requested for a model that only has a numerical one."""


class NotPositiveDefiniteError(VolhedgeError):
    """Grid covariance failed Cholesky even after maximum diagonal jitter."""

    def __init__(self, message, minor_index=None):
        super().__init__(message)
        self.minor_index = minor_index


class SingularKernelError(VolhedgeError):
    """Zero diagonal pivot in a triangular kernel solve."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class SingularHedgeError(VolhedgeError):
    """Expected asset gain (nearly) vanishes; the hedge recursion is undefined."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class DegenerateCostError(VolhedgeError):
    """|b| >= 1 in the position fixed point: cost term dominates expected gain."""


class NoSolutionError(VolhedgeError):
    """Neither branch of the absolute-value fixed point is consistent."""

    def __init__(self, message, candidates=None):
        super().__init__(message)
        self.candidates = candidates


class UnboundedInitialPositionError(VolhedgeError):
    """Minimal-cost initial position is unbounded (cost below expected return)."""
