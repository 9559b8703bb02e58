"""Exception hierarchy shared across the engine."""


class EngineError(Exception):
    """Base class for all engine errors."""


class InvalidKernelError(EngineError):
    """Kernel violates a structural requirement (even side, bad shape)."""


class InvalidPotentialError(EngineError):
    """Potential or score data violates nonnegativity or finiteness."""


class ShapeMismatchError(EngineError):
    """Operands disagree on grid shape or channel count."""


class FormatError(EngineError):
    """Tensor file is malformed; message names the offending byte offset."""


class GraphError(EngineError):
    """Graph is not a valid rooted tree."""


class ScheduleError(EngineError):
    """Message ordering violates dependencies or is incomplete."""


class BudgetError(EngineError):
    """Requested enumeration exceeds the configured budget."""


class ContractError(EngineError):
    """Caller passed data that breaks a documented precondition."""


class NonFiniteError(EngineError):
    """NaN or Inf appeared where finite values are required."""
