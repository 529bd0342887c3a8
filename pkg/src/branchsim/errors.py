"""Exception types shared by the engines and mapped to CLI exit codes."""


class BranchSimError(Exception):
    """Base class for all library errors."""


class DomainError(BranchSimError, ValueError):
    """An argument lies outside the domain of the operation."""


class ResourceLimitError(BranchSimError, RuntimeError):
    """A computation would exceed a configured size or cost budget."""


class ConsistencyError(BranchSimError, ArithmeticError):
    """A computed result violates an invariant it must satisfy."""


class EvaluationError(BranchSimError, ArithmeticError):
    """An objective function returned a non-finite value."""


class UnconvergedFitError(BranchSimError, RuntimeError):
    """A fit could not produce a usable damping factor."""
