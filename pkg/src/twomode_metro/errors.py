"""Exception hierarchy shared by all modules."""


class MetroError(Exception):
    """Base class for errors raised by this package."""


class InvalidArgument(MetroError, ValueError):
    pass


class TruncationError(MetroError):
    """Fock truncation cannot hold the requested state within the tail budget."""

    def __init__(self, message: str, required_cutoff: int | None = None):
        super().__init__(message)
        self.required_cutoff = required_cutoff


class NotIncoherentError(MetroError):
    """State carries coherences between different total particle numbers."""


class InvalidPovm(MetroError, ValueError):
    pass


class InvalidMoments(MetroError, ValueError):
    pass


class NumericalInconsistency(MetroError):
    pass


class EstimatorUndefined(MetroError):
    """Likelihood is flat over the window, so no maximum exists."""


class ConfigError(MetroError, ValueError):
    pass
