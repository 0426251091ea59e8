"""Exception hierarchy shared by all modules."""


class RoughFlowsError(Exception):
    """Base class for library errors."""


class ConfigurationError(RoughFlowsError, ValueError):
    """Invalid parameters or configuration."""


class DerivativeOrderError(RoughFlowsError, ValueError):
    """A derivative beyond the declared order of a field was requested."""


class OffGridError(RoughFlowsError, ValueError):
    """A grid-restricted object was queried at a time not on its grid."""


class ParameterMismatchError(RoughFlowsError, ValueError):
    """Two drivers with incompatible parameters or time domains were combined."""


class ChenViolationError(RoughFlowsError, ValueError):
    """An object failed the Chen relation (or a geometric constraint) beyond tolerance."""


class BlowUpError(RoughFlowsError, FloatingPointError):
    """An ODE solution left the guard region."""
