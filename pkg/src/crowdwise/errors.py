"""Exception types shared across the package."""


class ParameterError(ValueError):
    """Invalid model, population or grid parameters."""


class PositivityError(RuntimeError):
    """An opinion became non-positive during integration.

    Attributes
    ----------
    step : int
        Index of the step (1-based count of completed updates) whose result
        contained a non-positive opinion.
    """

    def __init__(self, step, message=None):
        self.step = int(step)
        super().__init__(message or f"opinion became non-positive at step {self.step}")


class DegenerateDynamicsError(ValueError):
    """Closed-form request with alpha + beta == 0."""


class MetricDomainError(ValueError):
    """Metric evaluated on non-positive opinions or truth."""


class SweepError(RuntimeError):
    """Every cell of a parameter sweep failed."""
