"""Relative-revenue pricing on a weighted least-squares linear demand model.

Demand of any competitor is modelled as ``a + b*own + c*sum(others)``.  The
agent picks the price maximizing its own predicted revenue minus the largest
predicted competitor revenue, with competitor prices forecast as medians over
an adaptively chosen window.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .base import Observation, Strategy
from .params import WlsParams

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class WlsModel:
    a: float
    b: float
    c: float
    scheme: str = "uniform"

    def demand(self, own, others_sum):
        return self.a + self.b * own + self.c * others_sum


def scheme_names(params: WlsParams) -> list[str]:
    return (["uniform"] + [f"half-life-{h:g}" for h in params.half_lives]
            + [f"last-{params.recent_window}"])


def scheme_weights(scheme: str, n_obs: int) -> np.ndarray:
    age = np.arange(n_obs - 1, -1, -1, dtype=float)
    if scheme == "uniform":
        return np.ones(n_obs)
    if scheme.startswith("half-life-"):
        return 0.5 ** (age / float(scheme[len("half-life-"):]))
    if scheme.startswith("last-"):
        return (age < int(scheme[len("last-"):])).astype(float)
    raise ValueError(f"unknown weighting scheme {scheme!r}")


def _solve_normal(lhs: np.ndarray, rhs: np.ndarray, scheme: str) -> WlsModel:
    ev = np.linalg.eigvalsh(lhs)
    if not np.all(np.isfinite(ev)) or ev[0] <= 1e-12 * max(ev[-1], 1e-300):
        log.debug("ill-conditioned WLS normal equations (%s); adding ridge", scheme)
        coef = np.linalg.lstsq(lhs + 1e-8 * np.eye(3), rhs, rcond=None)[0]
    else:
        coef = np.linalg.solve(lhs, rhs)
    return WlsModel(float(coef[0]), float(coef[1]), float(coef[2]), scheme)


def wls_fit(own_prices, others_sum, demand, scheme: str = "uniform",
            weights=None) -> WlsModel:
    """Weighted least squares for ``demand ~ a + b*own + c*others_sum``."""
    x = np.asarray(own_prices, dtype=float)
    s = np.asarray(others_sum, dtype=float)
    d = np.asarray(demand, dtype=float)
    if x.shape[0] < 4:
        raise ValueError(f"need at least 4 observations, got {x.shape[0]}")
    w = scheme_weights(scheme, x.shape[0]) if weights is None else np.asarray(weights, float)
    X = np.column_stack([np.ones_like(x), x, s])
    Xw = X * w[:, None]
    return _solve_normal(Xw.T @ X, Xw.T @ d, scheme)


class RunningWls:
    """Normal equations of one weighting scheme, updated one observation at a time.

    Gives the same fit as :func:`wls_fit` on the full history, in O(1) per step.
    """

    def __init__(self, scheme: str):
        self.scheme = scheme
        self.decay = 1.0
        self.window: int | None = None
        if scheme.startswith("half-life-"):
            self.decay = 0.5 ** (1.0 / float(scheme[len("half-life-"):]))
        elif scheme.startswith("last-"):
            self.window = int(scheme[len("last-"):])
        elif scheme != "uniform":
            raise ValueError(f"unknown weighting scheme {scheme!r}")
        self.lhs = np.zeros((3, 3))
        self.rhs = np.zeros(3)
        self.count = 0

    def add(self, x, s, d, dropped: tuple[float, float, float] | None = None) -> None:
        """Append ``(x, s, d)``; ``dropped`` is the row leaving a sliding window."""
        r = np.array([1.0, x, s])
        self.lhs *= self.decay
        self.rhs *= self.decay
        self.lhs += np.outer(r, r)
        self.rhs += r * d
        if self.window is not None and dropped is not None:
            q = np.array([1.0, dropped[0], dropped[1]])
            self.lhs -= np.outer(q, q)
            self.rhs -= q * dropped[2]
        self.count += 1

    def fit(self) -> WlsModel:
        if self.count < 4:
            raise ValueError(f"need at least 4 observations, got {self.count}")
        return _solve_normal(self.lhs, self.rhs, self.scheme)


def relative_revenue(model: WlsModel, own_grid: np.ndarray, competitor_prices) -> np.ndarray:
    """Own predicted revenue minus the best competitor's, for each own price."""
    comp = np.asarray(competitor_prices, dtype=float)
    total = comp.sum()
    own = own_grid * model.demand(own_grid, total)
    # competitor k faces the others' sum: total - p_k + own price
    rivals = comp[None, :] * model.demand(comp[None, :], total - comp[None, :] + own_grid[:, None])
    return own - rivals.max(axis=1)


def optimize_relative(model: WlsModel, competitor_prices, step: float = 0.1,
                      price_max: float = 100.0) -> float:
    grid = np.arange(1, int(round(price_max / step)) + 1) * step
    return float(grid[int(np.argmax(relative_revenue(model, grid, competitor_prices)))])


def median_forecasts(history: np.ndarray, windows) -> np.ndarray:
    """``(len(windows), k)`` median of the last ``w`` rows for each window."""
    return np.stack([np.median(history[-w:], axis=0) for w in windows])


class _Rows:
    """Append-only row buffer with amortized growth."""

    def __init__(self, shape: tuple[int, ...]):
        self.buf = np.empty((64,) + shape)
        self.n = 0

    def append(self, row) -> None:
        if self.n == self.buf.shape[0]:
            self.buf = np.concatenate([self.buf, np.empty_like(self.buf)])
        self.buf[self.n] = row
        self.n += 1

    @property
    def rows(self) -> np.ndarray:
        return self.buf[:self.n]


class Wls(Strategy):
    name = "wls"

    @classmethod
    def default_params(cls):
        return WlsParams()

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.schemes = scheme_names(self.params)
        self.running = [RunningWls(name) for name in self.schemes]
        self.fits: list[WlsModel] = []
        self.ingested = 0
        self.demand_errors = _Rows((len(self.schemes),))
        self.price_preds: np.ndarray | None = None
        self.price_errors: _Rows | None = None

    def random_price(self) -> float:
        return float(self.rng.uniform(0.0, self.params.price_max))

    def _track_price_forecasts(self, comp: np.ndarray) -> np.ndarray:
        windows = self.params.price_windows
        if self.price_preds is not None:
            if self.price_errors is None:
                self.price_errors = _Rows(self.price_preds.shape)
            self.price_errors.append(np.abs(self.price_preds - comp[-1][None, :]))
        self.price_preds = median_forecasts(comp, windows)
        if self.price_errors is None:
            return self.price_preds[0]
        mae = np.median(self.price_errors.rows, axis=0)  # (windows, k)
        best = np.argmin(mae, axis=0)
        return self.price_preds[best, np.arange(comp.shape[1])]

    def _update_demand_models(self, obs: Observation, comp: np.ndarray) -> WlsModel | None:
        x = obs.own_prices
        s = comp.sum(axis=1)
        d = obs.own_sales
        t = x.shape[0] - 1
        if self.fits:
            self.demand_errors.append([abs(f.demand(x[t], s[t]) - d[t]) for f in self.fits])
        # normally one new row per call; catch up if handed a longer history
        for i in range(self.ingested, t + 1):
            for run in self.running:
                old = None
                if run.window is not None and i >= run.window:
                    j = i - run.window
                    old = (float(x[j]), float(s[j]), float(d[j]))
                run.add(float(x[i]), float(s[i]), float(d[i]), old)
        self.ingested = t + 1
        if x.shape[0] < self.params.min_obs:
            return None
        self.fits = [run.fit() for run in self.running]
        self.spend(len(self.schemes) * 9)
        if self.demand_errors.n == 0:
            return self.fits[0]
        # first scheme wins ties
        return self.fits[int(np.argmin(np.median(self.demand_errors.rows, axis=0)))]

    def next_price(self, obs: Observation) -> float:
        p = self.params
        if obs.t == 0:
            return self.random_price()
        comp = obs.competitor_prices
        forecast = self._track_price_forecasts(comp)
        model = self._update_demand_models(obs, comp)
        if obs.period <= p.explore_periods or model is None:
            return self.random_price()
        own = obs.own_prices
        if own.shape[0] >= p.constant_run and np.all(own[-p.constant_run:] == own[-1]):
            last = float(own[-1])
            if last > 0:
                return float(self.rng.uniform(p.jitter_low * last, p.jitter_high * last))
            return self.random_price()
        return optimize_relative(model, forecast, p.price_step, p.price_max)
