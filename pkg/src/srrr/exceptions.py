"""Exception types raised by the library."""


class SrrrError(Exception):
    """Base class for all library errors."""


class DimensionError(SrrrError, ValueError):
    """Operands have incompatible shapes or an empty dimension."""


class PreconditionError(SrrrError, ValueError):
    """An operation's input contract is violated."""


class ParameterError(SrrrError, ValueError):
    """A count or constant lies outside its admissible range."""


class DegenerateDesignError(SrrrError, ArithmeticError):
    """A least-squares problem is rank deficient."""


class EmptyModelError(SrrrError, ValueError):
    """A structural pattern was requested for an all-zero coefficient matrix."""


class InfeasibleConfigError(SrrrError, ValueError):
    """A Monte-Carlo configuration has no finite closed-form value."""
