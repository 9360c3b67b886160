"""Bayesian mixture autoregressive models with standardized Student-t innovations."""

from .distributions import StandardizedT, TruncatedGamma
from .gibbs import ChainTrace, GibbsSettings, run_gibbs
from .model import LatentState, StabilityReport, TMarSpec, simulate_series, stability_check
from .priors import PriorConfig, default_priors

__all__ = [
    "StandardizedT",
    "TruncatedGamma",
    "TMarSpec",
    "LatentState",
    "StabilityReport",
    "stability_check",
    "simulate_series",
    "PriorConfig",
    "default_priors",
    "GibbsSettings",
    "ChainTrace",
    "run_gibbs",
]
