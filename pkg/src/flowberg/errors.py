"""Exception hierarchy shared by all flowberg modules."""


class FlowbergError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(FlowbergError, ValueError):
    """Invalid user-supplied configuration (tree spec, bounds, file contents)."""


class AssumptionViolation(FlowbergError, ValueError):
    """A structural hypothesis on the weight or measure fails (e.g. non-summable lower tail)."""


class CannotCertify(FlowbergError):
    """A tail sum has no rule from which a certified remainder bound can be derived."""


class UnsupportedFunction(FlowbergError, ValueError):
    """A function's behaviour outside the window cannot be represented exactly."""


class PreconditionError(FlowbergError, ValueError):
    """An operation was called outside its documented domain."""
