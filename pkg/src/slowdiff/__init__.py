"""Anomalous slow diffusion in multi-scale potentials.

Effective diffusivities, reproducible Monte Carlo for the overdamped Langevin
dynamics ``dy = dW - V'(y) dt``, topological-pressure classification, Green
function inequalities, exponential-martingale bounds and heat-kernel envelopes.
"""
from .errors import (ArgumentError, DomainError, ResourceError, SlowdiffError,
                     StatisticalValidityWarning)
from .potential import (ModelConstants, MultiScalePotential, PeriodicPotential, ScaleSchedule,
                        eval_gradient, eval_potential, model_constants, tail_oscillation_bound)

__version__ = "0.1.0"

__all__ = [
    "ArgumentError", "DomainError", "ResourceError", "SlowdiffError", "StatisticalValidityWarning",
    "ModelConstants", "MultiScalePotential", "PeriodicPotential", "ScaleSchedule",
    "eval_gradient", "eval_potential", "model_constants", "tail_oscillation_bound",
]
