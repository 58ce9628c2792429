"""Exception hierarchy shared by all modules."""


class QAnalogError(Exception):
    """Base class for package errors."""


class ResourceError(QAnalogError):
    """A dense simulation would exceed the configured qubit or memory guard."""


class DegeneratePostselectionError(QAnalogError):
    """Postselection on a branch whose probability is numerically zero."""


class DivergentSeriesError(QAnalogError, ValueError):
    """The requested stochastic Fourier series does not converge."""


class LoadingError(QAnalogError, ValueError):
    """A vector cannot be amplitude-loaded (zero norm, non-finite entries)."""


class BudgetError(QAnalogError):
    """The requested accuracy is infeasible within the qubit budget."""


class PostselectionCapError(QAnalogError):
    """Repeat-until-success exceeded its attempt cap."""


class VerificationError(QAnalogError):
    """A numerical self-check failed."""
