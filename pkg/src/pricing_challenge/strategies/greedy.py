from __future__ import annotations

import numpy as np

from .base import Observation, Strategy
from .params import GreedyParams


def linear_quantile(values, q: float) -> float:
    """``np.quantile`` with linear interpolation, without its per-call overhead."""
    v = np.sort(np.asarray(values, dtype=float), axis=None)
    pos = q * (v.size - 1)
    lo = int(pos)
    hi = min(lo + 1, v.size - 1)
    frac = pos - lo
    a, b = float(v[lo]), float(v[hi])
    # same two-sided lerp numpy uses, so results agree bit for bit
    return b - (b - a) * (1.0 - frac) if frac >= 0.5 else a + (b - a) * frac


def greedy_rule(previous_min: float, window_quantile: float, floor: float = 5.0) -> float:
    """Match the lowest price, unless it undercuts the recent low quantile."""
    if previous_min < window_quantile:
        return max(window_quantile, floor)
    return previous_min


class Greedy(Strategy):
    """Price matching with an anti race-to-the-bottom floor.

    Only the competitors' prices are read: matching one's own past price
    would lock the agent onto its first random draw.
    """

    name = "greedy"

    @classmethod
    def default_params(cls):
        return GreedyParams()

    def next_price(self, obs: Observation) -> float:
        p = self.params
        if obs.t == 0:
            return float(self.rng.uniform(p.first_low, p.first_high))
        others = obs.competitor_prices
        prev_min = float(others[-1].min())
        q = linear_quantile(others[-p.window:], p.quantile)
        return greedy_rule(prev_min, q, p.floor)
