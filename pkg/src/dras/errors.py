"""Exception hierarchy shared across the package."""


class DrasError(Exception):
    """Base class for all package errors."""


class NumericalBreakdown(DrasError):
    """The simplex basis became singular or the pivot loop failed to terminate."""


class DimensionMismatch(DrasError, ValueError):
    pass


class LengthMismatch(DrasError, ValueError):
    pass


class InvalidCosts(DrasError, ValueError):
    pass


class InvalidSupport(DrasError, ValueError):
    pass


class ScenarioInfeasible(DrasError, ValueError):
    pass


class IndexOutOfRange(DrasError, IndexError):
    pass


class TooLarge(DrasError, ValueError):
    pass


class EmptySampleSet(DrasError, ValueError):
    pass


class TooFewSamples(DrasError, ValueError):
    pass


class InvalidParams(DrasError, ValueError):
    pass


class NonConvergence(DrasError):
    """Cutting-plane loop hit its iteration cap with cuts still violated."""


class DecompositionResidual(DrasError):
    """Flow peeling left more unassigned mass than the tolerance allows."""


class InfeasibleModel(DrasError):
    """An LP that should always be feasible came back infeasible or unbounded."""
