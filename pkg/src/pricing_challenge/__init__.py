"""Simulator for a dynamic pricing tournament between learning agents."""

from .engine import (EngineConfig, Scorecard, StrategySpec, TournamentResult, run_competition,
                     run_simulation, run_tournament, sanitize_price, score_simulation)
from .market import MarketParams, expected_sales, realize_period, sample_market_params
from .strategies import CONTEST_ROSTER, REGISTRY

__version__ = "0.1.0"

__all__ = [
    "EngineConfig", "MarketParams", "CONTEST_ROSTER", "REGISTRY", "Scorecard", "StrategySpec",
    "TournamentResult", "expected_sales", "realize_period", "run_competition", "run_simulation",
    "run_tournament", "sample_market_params", "sanitize_price", "score_simulation",
]
