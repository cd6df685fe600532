"""Exception hierarchy shared by all modules."""


class MinfluxError(Exception):
    """Base class for library errors."""


class DomainError(MinfluxError, ValueError):
    """Argument outside the momentum domain or the domain of f."""


class InversionError(MinfluxError):
    """Numerical inverse of the deformation function did not converge."""


class SeriesOrderError(MinfluxError, ValueError):
    """Requested series order exceeds what is available."""


class AdmissibilityError(MinfluxError, ValueError):
    """Deformation spec violates an invariant (odd f, unit slope, monotone)."""


class AliasingError(MinfluxError):
    """Grid spacing violates the band limit of the state."""


class NumericalHealthError(MinfluxError):
    """Imaginary residue or another internal consistency guard tripped."""


class SpecMismatchError(MinfluxError, ValueError):
    """Inputs were built under different deformation specs."""


class MethodMismatchError(MinfluxError, ValueError):
    """Both sides of the continuity equation must use the same series order."""


class NormalizationError(MinfluxError, ValueError):
    """Zero-norm state cannot be normalized."""
