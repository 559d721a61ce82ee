"""Exception hierarchy."""


class IFPError(Exception):
    """Base class for all package errors."""


class InvalidParameter(IFPError, ValueError):
    pass


class NotIrreducible(IFPError):
    pass


class NoConvergence(IFPError):
    """Iteration budget exhausted; ``estimate`` holds the last iterate."""

    def __init__(self, msg, estimate=None):
        super().__init__(msg)
        self.estimate = estimate


class GrowthOverflow(IFPError, OverflowError):
    pass


class UndefinedMoment(IFPError):
    pass


class DomainError(IFPError, ValueError):
    pass


class RootBracketFailure(IFPError):
    pass


class GridMismatch(IFPError):
    pass


class AssumptionViolated(IFPError):
    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report


class NotConverged(IFPError):
    """Time iteration hit ``max_iter``; carries the best iterate and trace."""

    def __init__(self, msg, policy=None, trace=None):
        super().__init__(msg)
        self.policy = policy
        self.trace = trace


class DominanceUnverifiable(IFPError):
    pass


class DegenerateVariance(IFPError):
    pass


class DegenerateAlpha(IFPError):
    pass


class InsufficientTail(IFPError):
    pass


class SchemaError(IFPError):
    """Malformed input file; ``where`` names the offending line or field."""

    def __init__(self, msg, where=None):
        super().__init__(f"{where}: {msg}" if where else msg)
        self.where = where


class UnknownParameter(IFPError, KeyError):
    pass
