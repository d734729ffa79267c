"""Exception hierarchy shared by every module of the package."""


class SheafControlError(Exception):
    """Base class for all errors raised by this package."""


class CycleError(SheafControlError, ValueError):
    """A generating relation closes a directed cycle among distinct elements."""


class UnknownElement(SheafControlError, KeyError):
    pass


class MissingSelfEdge(SheafControlError, ValueError):
    def __init__(self, vertex):
        super().__init__(f"vertex {vertex!r} has no self-edge")
        self.vertex = vertex


class UnknownVertex(SheafControlError, KeyError):
    pass


class IndexOutOfRange(SheafControlError, IndexError):
    pass


class SignatureMismatch(SheafControlError, ValueError):
    pass


class DimensionMismatch(SheafControlError, ValueError):
    pass


class DegenerateDomain(SheafControlError, ValueError):
    """No usable sample points (or no pair of distinct points) in a domain."""


class NotGlobal(SheafControlError, ValueError):
    pass


class SupportMismatch(SheafControlError, ValueError):
    pass


class NotASection(SheafControlError, ValueError):
    pass


class MissingValue(SheafControlError, KeyError):
    pass


class InfeasibleProblem(SheafControlError, ValueError):
    pass


class BudgetExhausted(SheafControlError, RuntimeError):
    """Raised when a caller asks for a converged solve and the budget ran out.

    The best assignment found so far is attached as ``result``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class SchemeInvalid(SheafControlError, ValueError):
    pass


class InconsistentDynamics(SheafControlError, ValueError):
    pass


class ParseError(SheafControlError, ValueError):
    pass
