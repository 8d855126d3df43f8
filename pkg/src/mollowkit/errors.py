"""Exception hierarchy shared by all modules."""


class MollowError(Exception):
    """Base class for domain errors raised by this package."""


class UnderdampedDomain(MollowError):
    """The closed forms need a real oscillation frequency (mu**2 > 0).

    Raised when the drive is too weak for the oscillatory branch.  Use
    :mod:`mollowkit.dynamics` or :func:`mollowkit.correlations.g2_continued`
    in that regime.
    """


class NoSidebands(MollowError):
    """Peak finder did not resolve the three Mollow components."""


class CascadeAmbiguity(MollowError):
    """Cross-correlation trace carries no usable asymmetry."""


class DegenerateData(MollowError):
    """Data cannot constrain the requested fit parameters."""


class FitError(MollowError):
    """Optimizer failed to converge."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class ConfigError(ValueError):
    """Invalid scenario file or command-line option."""
