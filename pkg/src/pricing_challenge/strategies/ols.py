"""Own-price demand regression with four log/linear specifications."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import Observation, Strategy
from .params import OlsParams

SPECS = ("lin-lin", "log-lin", "lin-log", "log-log")


@dataclass(frozen=True)
class DemandFit:
    spec: str
    intercept: float
    slope: float
    r2: float

    def predict(self, price: np.ndarray) -> np.ndarray:
        x = np.log(price) if self.spec in ("log-lin", "log-log") else price
        y = self.intercept + self.slope * x
        if self.spec in ("lin-log", "log-log"):
            y = np.exp(np.minimum(y, 700.0))
        return np.maximum(y, 0.0)


def _simple_ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float] | None:
    if x.shape[0] < 3:
        return None
    xm, ym = x.mean(), y.mean()
    dx, dy = x - xm, y - ym
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx <= 1e-12 or syy <= 1e-12:
        return None
    slope = float(dx @ dy) / sxx
    intercept = float(ym - slope * xm)
    resid = dy - slope * dx
    return intercept, slope, 1.0 - float(resid @ resid) / syy


def fit_demand_models(prices, demand) -> list[DemandFit]:
    """Fit all four specifications; log transforms drop non-positive values."""
    p = np.asarray(prices, dtype=float)
    d = np.asarray(demand, dtype=float)
    fits = []
    for spec in SPECS:
        log_x = spec in ("log-lin", "log-log")
        log_y = spec in ("lin-log", "log-log")
        keep = np.ones(p.shape[0], dtype=bool)
        if log_x:
            keep &= p > 0
        if log_y:
            keep &= d > 0
        x = np.log(p[keep]) if log_x else p[keep]
        y = np.log(d[keep]) if log_y else d[keep]
        res = _simple_ols(x, y)
        if res is not None:
            fits.append(DemandFit(spec, *res))
    return fits


def select_model(fits: list[DemandFit]) -> DemandFit | None:
    """Highest R^2; earlier specification wins ties."""
    best = None
    for f in fits:
        if best is None or f.r2 > best.r2:
            best = f
    return best


def revenue_line_search(predict, step: float, price_max: float) -> float:
    grid = np.arange(1, int(round(price_max / step)) + 1) * step
    return float(grid[int(np.argmax(grid * predict(grid)))])


class Ols(Strategy):
    name = "ols"

    @classmethod
    def default_params(cls):
        return OlsParams()

    def explore(self) -> float:
        return float(self.rng.uniform(0.0, 100.0))

    def next_price(self, obs: Observation) -> float:
        p = self.params
        if obs.period <= p.explore_periods:
            return self.explore()
        u = self.rng.random()
        if u < p.disrupt_prob:
            return 0.0
        if u < p.disrupt_prob + p.explore_prob:
            return self.explore()
        model = select_model(fit_demand_models(obs.own_prices, obs.own_sales))
        if model is None:
            return self.explore()
        price = revenue_line_search(model.predict, p.price_step, p.price_max)
        price += self.rng.uniform(-p.perturbation, p.perturbation)
        return max(price, 0.0)
