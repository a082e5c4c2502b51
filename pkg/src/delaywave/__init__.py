"""Monotone travelling-wave fronts for reaction-diffusion equations with delay
in the diffusion and reaction terms."""
from . import charpoly, errors, green, models, perron, simulate, waves
from .errors import DelayWaveError, GuardError, NumericalError

__version__ = "0.1.0"

__all__ = ["charpoly", "errors", "green", "models", "perron", "simulate", "waves",
           "DelayWaveError", "GuardError", "NumericalError", "__version__"]
