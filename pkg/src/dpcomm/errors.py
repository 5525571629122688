"""Exception types shared across the package.

Callers that only care about "bad input" can catch ValueError; the concrete
subclasses exist so that tests and the CLI can tell failure modes apart.
"""


class InvalidParameterError(ValueError):
    """An argument violates a documented precondition (sign, range, shape)."""


class InfeasibleOrderError(ValueError):
    """The subsampled-Gaussian RDP bound does not apply at this order.

    The message carries the violated inequality with its numeric values.
    """


class CompositionOrderError(ValueError):
    """RDP points with mismatched orders cannot be composed additively."""


class CalibrationInfeasibleError(RuntimeError):
    """No trade-off parameter in the search grid satisfies the constraints.

    The message reports the tightest (least violated) constraint seen.
    """


class DegenerateMechanismError(ValueError):
    """A de-biasing estimator is undefined (full randomization, p = 1)."""


class InvalidActionError(ValueError):
    """A game action is not valid in the current state (e.g. overspending)."""


class EnumerationBudgetError(RuntimeError):
    """Exhaustive policy enumeration would exceed the configured budget."""


class StepSizeError(RuntimeError):
    """Gradient descent diverged; the learning rate is too large."""


class SingularTargetError(ValueError):
    """A covariance that must be inverted is singular."""


class EvaluationError(ValueError):
    """A user-supplied callable returned a non-finite value."""
