"""Non-exchangeable interacting particle systems and their limits.

Modules: ``kernels`` (graphons, random graphs, cut norms), ``dynamics``
(microscopic systems and the integrator), ``continuum`` (graph-limit
equations), ``measures`` (empirical measures, W1 and BL distances),
``meanfield`` (characteristics solvers) and ``lab`` (configs, sweeps, CLI).
"""

from . import continuum, dynamics, interactions, kernels, meanfield, measures
from .errors import (ArgumentError, CapabilityError, ConfigError, DivergenceError, NexlimError,
                     SeparationError)

__version__ = "0.1.0"

__all__ = [
    "ArgumentError", "CapabilityError", "ConfigError", "DivergenceError", "NexlimError",
    "SeparationError", "continuum", "dynamics", "interactions", "kernels", "meanfield",
    "measures",
]
