"""Regularized exponential mechanism for private convex optimization in general norms."""

from .geometry import Ball, Box, NormSpec, interval
from .losses import LossModel, PopulationSpec
from .mechanism import (MechanismParams, corollary_bound, erm_params, nonprivate_minimum, params_for, sco_params,
                        solve_private, split_delta, utility_bound)
from .regularizers import Regularizer, regularizer_for_geometry
from .samplers import SamplerConfig, sample

__version__ = "0.1.0"

__all__ = ["Ball", "Box", "LossModel", "MechanismParams", "NormSpec", "PopulationSpec", "Regularizer",
           "SamplerConfig", "corollary_bound", "erm_params", "interval", "nonprivate_minimum", "params_for",
           "regularizer_for_geometry", "sample", "sco_params", "solve_private", "split_delta", "utility_bound"]
