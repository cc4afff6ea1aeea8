"""Every hyperparameter the algorithm descriptions leave open, in one place.

Values marked in the contest descriptions (epsilon 0.2, 40/100 period
exploration phases, 1000 competitor samples, ...) are defaults here too; the
remaining constants are pinned choices that can be overridden per run.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class GreedyParams:
    window: int = 30
    quantile: float = 0.10
    floor: float = 5.0
    first_low: float = 30.0
    first_high: float = 70.0


@dataclass(frozen=True)
class BanditGridParams:
    epsilon: float = 0.2
    grid: tuple[float, ...] = (10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0, 100.0)


@dataclass(frozen=True)
class BanditBucketParams:
    epsilon: float = 0.2
    n_buckets: int = 10
    bucket_width: float = 10.0
    smoothing: float = 0.3


@dataclass(frozen=True)
class BanditModelParams:
    epsilon: float = 0.2
    explore_periods: int = 100
    explore_high: float = 100.0
    level_smoothing: float = 0.3
    trend_smoothing: float = 0.1
    price_step: float = 0.1
    price_max: float = 100.0
    anneal_proposals: int = 2000
    anneal_cooling: float = 0.95
    anneal_block: int = 20
    anneal_t0: float = 0.05
    wtp_nodes: int = 16
    grid: tuple[float, ...] = (10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0, 100.0)


@dataclass(frozen=True)
class OlsParams:
    explore_periods: int = 40
    explore_prob: float = 0.05
    disrupt_prob: float = 0.01
    price_step: float = 0.1
    price_max: float = 100.0
    perturbation: float = 1.0


@dataclass(frozen=True)
class LogitParams:
    explore_periods: int = 100
    refit_every: int = 20
    n_groups: int = 10
    em_iterations: int = 30
    em_refit_iterations: int = 8
    em_tol: float = 1e-6
    scoring_steps: int = 3
    mvn_samples: int = 1000
    price_step: float = 0.5
    price_max: float = 100.0


@dataclass(frozen=True)
class MlParams:
    explore_length: int = 40
    amplitude: float = 0.3
    cosine_period: int = 20
    first_low: float = 20.0
    first_high: float = 80.0
    exploit_min: int = 70
    exploit_max: int = 150
    abort_fraction: float = 0.5
    abort_window: int = 10
    folds: int = 5
    smoothing: float = 0.3
    price_step: float = 0.1
    price_max: float = 100.0
    forest_trees: int = 10
    forest_depth: int = 5


@dataclass(frozen=True)
class WlsParams:
    explore_periods: int = 10
    half_lives: tuple[float, ...] = (20.0, 100.0)
    recent_window: int = 50
    price_windows: tuple[int, ...] = (5, 10, 20, 50)
    constant_run: int = 3
    jitter_low: float = 0.5
    jitter_high: float = 1.5
    price_step: float = 0.1
    price_max: float = 100.0
    min_obs: int = 4


def apply_overrides(params, overrides: dict):
    """Return ``params`` with ``overrides`` applied; unknown keys raise ``KeyError``."""
    names = {f.name: f for f in fields(params)}
    clean = {}
    for key, value in overrides.items():
        if key not in names:
            raise KeyError(f"unknown parameter {key!r} for {type(params).__name__}")
        current = getattr(params, key)
        if isinstance(current, tuple):
            value = tuple(value)
        elif isinstance(current, float):
            value = float(value)
        elif isinstance(current, int):
            value = int(value)
        clean[key] = value
    return replace(params, **clean)
