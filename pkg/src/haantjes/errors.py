"""Exception hierarchy shared by all haantjes modules."""


class HaantjesError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(HaantjesError):
    """A point lies outside (or on the boundary of) its chart box."""


class EvalError(HaantjesError):
    """An expression is undefined at the evaluation point."""


class DimensionMismatch(HaantjesError):
    """Operands live on charts of different dimension or on different charts."""


class SingularJacobian(HaantjesError):
    """The Jacobian of a coordinate change is numerically singular."""


class ParseError(HaantjesError):
    """Malformed expression source.

    Carries the byte offset of the failure and the set of token kinds that
    would have been accepted there.
    """

    def __init__(self, message, offset, expected=()):
        super().__init__(f"{message} at offset {offset}")
        self.message = message
        self.offset = offset
        self.expected = frozenset(expected)


class UnknownVariable(HaantjesError):
    """A variable index exceeds the chart dimension."""


class ArityError(HaantjesError):
    """A function call has the wrong number of arguments."""


class SchemaError(HaantjesError):
    """A manifest violates the structural schema (missing field, bad counts)."""


class PreconditionViolated(HaantjesError):
    """An operation's enforced precondition failed.

    ``worst_index`` identifies the offending component tuple, ``residual``
    its magnitude.
    """

    def __init__(self, message, worst_index=None, residual=None):
        super().__init__(message)
        self.worst_index = worst_index
        self.residual = residual


class NotClosed(HaantjesError):
    """Potential integration requested for forms that failed the closedness check."""


class QuadratureStall(HaantjesError):
    """Adaptive quadrature failed to converge within the refinement budget."""


class DegenerateFrame(HaantjesError):
    """The 1-forms produced by the recursion operators do not form a basis."""


class NoGenerator(HaantjesError):
    """A chain-generator precondition failed (frame dependent or non-commuting)."""


class FrameIntegrationFailure(HaantjesError):
    """Flow integration for frame coordinates failed to meet its error control."""


class SingularMetric(HaantjesError):
    """The induced metric is numerically singular at the evaluation point."""


class ZeroDenominator(HaantjesError):
    """A proportionality fit hit a vanishing reference tensor at a point."""


class HypothesisUnmet(HaantjesError):
    """A closed-form formula was evaluated outside its constancy hypotheses."""


class CFLViolation(HaantjesError):
    """The requested time step violates the advective stability bound."""


class Blowup(HaantjesError):
    """Gradient blow-up detected during time integration (pre-shock guard).

    Informational: hydrodynamic systems do form shocks; this marks the
    breakdown time rather than an implementation fault.
    """

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time
