"""Data-generating process, latent oracles, and the Monte Carlo harness."""

from .dgp import (
    CirParams,
    LatentPaths,
    SimConfig,
    VolRealization,
    build_panel,
    simulate_cir,
    simulate_model,
    simulate_volatility,
)
from .mc import MCConfig, MCResult, consistency_sweep, mc_run
from .oracles import estimand_oracles, functional_paths, oracle_quadcov, sigma_oracle

__all__ = [
    "CirParams",
    "LatentPaths",
    "SimConfig",
    "VolRealization",
    "build_panel",
    "simulate_cir",
    "simulate_model",
    "simulate_volatility",
    "MCConfig",
    "MCResult",
    "consistency_sweep",
    "mc_run",
    "estimand_oracles",
    "functional_paths",
    "oracle_quadcov",
    "sigma_oracle",
]
