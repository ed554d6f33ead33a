"""Exception hierarchy shared by all lyapmotion modules."""


class LyapmotionError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(LyapmotionError, ValueError):
    """A precondition on an argument was violated."""


class NumericalFailureError(LyapmotionError, RuntimeError):
    """An iterative routine hit its cap; carries the best estimate so far."""

    def __init__(self, message, best_estimate=None):
        super().__init__(message)
        self.best_estimate = best_estimate


class DegenerateConfigurationError(LyapmotionError, RuntimeError):
    """Geometric configuration outside the domain of the requested quantity."""


class SceneNotFoundError(LyapmotionError, KeyError):
    """Unknown builtin scene name."""


class InfeasibleStartError(LyapmotionError, RuntimeError):
    """Trajectory optimization found no collision-free solution."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DatasetEmptyError(LyapmotionError, RuntimeError):
    """No feasible demonstrations could be generated."""


class TrainingDivergedError(LyapmotionError, RuntimeError):
    """Training produced a non-finite loss; carries the last finite params."""

    def __init__(self, message, last_checkpoint=None):
        super().__init__(message)
        self.last_checkpoint = last_checkpoint


class AtGoalError(LyapmotionError, ValueError):
    """Operation undefined exactly at the goal state."""


class DegenerateGradientError(LyapmotionError, RuntimeError):
    """Lyapunov gradient magnitude below the usable floor."""
