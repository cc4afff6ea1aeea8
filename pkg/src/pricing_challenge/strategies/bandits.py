"""Epsilon-greedy bandits over a price grid and over price buckets."""

from __future__ import annotations

import numpy as np

from .base import Observation, Strategy
from .params import BanditBucketParams, BanditGridParams


def epsilon_greedy(values: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    """Uniform random arm with probability ``epsilon``, else the first argmax.

    Always consumes one uniform draw so the stream position does not depend
    on the branch taken.
    """
    if rng.random() < epsilon:
        return int(rng.integers(values.shape[0]))
    return int(np.argmax(values))


class ArmTable:
    """Running mean reward per arm (optionally per context column)."""

    def __init__(self, shape):
        self.counts = np.zeros(shape, dtype=np.int64)
        self.means = np.zeros(shape)

    def update(self, index, reward: float) -> None:
        self.counts[index] += 1
        self.means[index] += (reward - self.means[index]) / self.counts[index]

    def reset(self) -> None:
        self.counts[...] = 0
        self.means[...] = 0.0


def last_revenue(obs: Observation) -> float:
    return float(obs.prices[-1, obs.own_index]) * float(obs.own_sales[-1])


class BanditGrid(Strategy):
    """Ten arms at fixed prices; competitors are ignored."""

    name = "b-grid"

    @classmethod
    def default_params(cls):
        return BanditGridParams()

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.grid = np.asarray(self.params.grid, dtype=float)
        self.table = ArmTable(self.grid.shape[0])
        self.last_arm: int | None = None

    def next_price(self, obs: Observation) -> float:
        if self.last_arm is not None and obs.t > 0:
            self.table.update(self.last_arm, last_revenue(obs))
        arm = epsilon_greedy(self.table.means, self.params.epsilon, self.rng)
        self.last_arm = arm
        return float(self.grid[arm])


def price_bucket(prices, width: float, n_buckets: int) -> np.ndarray:
    """Index of the bucket ``(k*width, (k+1)*width]``; out-of-range prices are clipped."""
    idx = np.ceil(np.asarray(prices, dtype=float) / width).astype(np.int64) - 1
    return np.clip(idx, 0, n_buckets - 1)


class ModalBucketForecast:
    """Exponentially smoothed per-bucket counts of competitor prices.

    The forecast modal bucket is the argmax of the smoothed counts (lowest
    bucket on ties).
    """

    def __init__(self, n_buckets: int, width: float, alpha: float):
        self.n_buckets = n_buckets
        self.width = width
        self.alpha = alpha
        self.level: np.ndarray | None = None

    def update(self, competitor_prices) -> None:
        counts = np.bincount(price_bucket(competitor_prices, self.width, self.n_buckets),
                             minlength=self.n_buckets).astype(float)
        if self.level is None:
            self.level = counts
        else:
            self.level = self.alpha * counts + (1.0 - self.alpha) * self.level

    def mode(self) -> int:
        return 0 if self.level is None else int(np.argmax(self.level))


class BanditBucket(Strategy):
    """Ten price-bucket arms whose values are conditioned on the forecast
    modal bucket of the competitors' prices."""

    name = "b-bucket"

    @classmethod
    def default_params(cls):
        return BanditBucketParams()

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        p = self.params
        self.table = ArmTable((p.n_buckets, p.n_buckets))
        self.forecast = ModalBucketForecast(p.n_buckets, p.bucket_width, p.smoothing)
        self.last_cell: tuple[int, int] | None = None

    def sample_in_bucket(self, arm: int) -> float:
        hi = (arm + 1) * self.params.bucket_width
        # (lo, hi]: subtract a draw from [0, width)
        return float(hi - self.rng.random() * self.params.bucket_width)

    def next_price(self, obs: Observation) -> float:
        if obs.t > 0:
            if self.last_cell is not None:
                self.table.update(self.last_cell, last_revenue(obs))
            row = obs.prices[-1]
            self.forecast.update(np.delete(row, self.own_index))
        modal = self.forecast.mode()
        arm = epsilon_greedy(self.table.means[:, modal], self.params.epsilon, self.rng)
        self.last_cell = (arm, modal)
        return self.sample_in_bucket(arm)
