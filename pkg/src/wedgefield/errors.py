"""Exception types raised across the package."""


class WedgefieldError(Exception):
    """Base class for all package errors."""


class InvalidTransform(WedgefieldError, ValueError):
    pass


class NotOnOrbit(WedgefieldError, ValueError):
    pass


class DegenerateOrbit(WedgefieldError, ValueError):
    pass


class NoConvergence(WedgefieldError, RuntimeError):
    pass


class QuadratureFailure(WedgefieldError, RuntimeError):
    pass


class Unsupported(WedgefieldError, NotImplementedError):
    """The requested action has no exact representation for this object."""


class UnsupportedTwistFunction(Unsupported):
    pass


class DegreeMismatch(WedgefieldError, ValueError):
    pass


class DegreeTooLarge(WedgefieldError, ValueError):
    pass


class LatticeTooLarge(WedgefieldError, ValueError):
    pass


class OffShell(WedgefieldError, ValueError):
    pass


class WedgeOrderViolation(WedgefieldError, ValueError):
    pass


class SupportViolation(WedgefieldError, ValueError):
    pass


class ConfigError(WedgefieldError, ValueError):
    pass
