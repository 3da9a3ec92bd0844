"""Exception and warning types raised across the package."""


class DomainError(ValueError):
    """A parameter lies outside the region where an integral converges."""


class ConstructionError(RuntimeError):
    """An internally built table failed its self-consistency check."""


class CapExceeded(ValueError):
    """A partition weight exceeds the degree cap of a zonal table."""


class PoleError(ZeroDivisionError):
    """A generalized Pochhammer symbol in a series denominator vanished."""


class NonfiniteIntegrand(ArithmeticError):
    """The integrand returned inf or nan on the integration support."""


class EnvelopeError(RuntimeError):
    """Rejection sampling exhausted its proposal budget."""


class ConfigError(ValueError):
    """An experiment configuration could not be parsed or validated."""


class HeavyTailWarning(RuntimeWarning):
    """Importance weights look heavy tailed; the standard error may be unreliable."""
