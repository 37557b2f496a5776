class ConfigurationError(ValueError):
    """Bad shapes, parameters or scenario settings."""


class InfeasibleError(RuntimeError):
    """A controller constraint cannot be met at the current state."""


class UnsafeInitialConditionError(ValueError):
    """The initial state is not inside the interior of the safe set."""


class SimulationError(RuntimeError):
    """Closed-loop integration aborted."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ConfigParseError(ValueError):
    """A scenario file is not valid TOML or lacks the scenario key."""
