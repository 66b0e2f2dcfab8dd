"""Stochastic photon sources and their exact statistics oracles."""
from __future__ import annotations

from .config import MODELS, QdCwConfig, QdPulsedConfig, SpdcConfig, load_config
from .oracle import OracleStats, cw_rates, oracle_stats
from .sources import (
    RNG_ALGORITHM,
    SIMULATORS,
    simulate,
    simulate_qd_cw,
    simulate_qd_pulsed,
    simulate_spdc,
)

__all__ = [
    "MODELS", "QdCwConfig", "QdPulsedConfig", "SpdcConfig", "load_config",
    "OracleStats", "cw_rates", "oracle_stats",
    "RNG_ALGORITHM", "SIMULATORS", "simulate", "simulate_qd_cw", "simulate_qd_pulsed",
    "simulate_spdc",
]
