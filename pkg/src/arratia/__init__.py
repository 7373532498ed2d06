"""Monte Carlo laboratory for coalescing Brownian motion (the Arratia flow)."""

__version__ = "0.1.0"

from .errors import ConfigError, DomainError, SimulationError

__all__ = ["ConfigError", "DomainError", "SimulationError", "__version__"]
