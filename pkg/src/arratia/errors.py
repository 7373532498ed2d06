class DomainError(ValueError):
    """An argument lies outside the mathematical domain of a formula."""


class ConfigError(ValueError):
    """An experiment or simulation configuration is invalid."""


class SimulationError(RuntimeError):
    """Raised when a simulation step produces a non-finite state."""

    def __init__(self, message, position=None):
        super().__init__(message)
        self.position = position
