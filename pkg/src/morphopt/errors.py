"""Shared exception types."""


class EvaluationSingularity(RuntimeError):
    """An evaluator was queried at a point where it is not differentiable
    (a focal point of a distance sum, the center of a distance objective)."""


class SingularSystemError(RuntimeError):
    """The stationarity matrix K(x, t) is numerically singular."""

    def __init__(self, message, x=None, t=None, cond=None):
        super().__init__(message)
        self.x = x
        self.t = t
        self.cond = cond


class BudgetExceededError(ValueError):
    """A symbolic expansion (determinant of a matrix pencil) exceeds the
    supported size budget."""


class ProblemFormatError(ValueError):
    """A problem JSON document is malformed; the message names the field."""
