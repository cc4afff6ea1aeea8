"""Alternating cosine exploration and regression-driven exploitation cycles."""

from __future__ import annotations

import logging
import math
import warnings

import numpy as np
import sklearn
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import ConvergenceWarning
from sklearn.linear_model import BayesianRidge, Lasso, LinearRegression, Ridge, SGDRegressor
from sklearn.pipeline import Pipeline, make_pipeline
from sklearn.preprocessing import StandardScaler
from sklearn.tree import DecisionTreeRegressor

from .base import Observation, Strategy
from .params import MlParams

log = logging.getLogger(__name__)


class BaggedTrees(RegressorMixin, BaseEstimator):
    """Bootstrap-aggregated regression trees (a random forest using every feature).

    Serial and free of the ensemble machinery overhead, which dominates at
    the tiny sample sizes seen here.
    """

    def __init__(self, n_estimators: int = 10, max_depth: int | None = 5, random_state: int = 0):
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.random_state = random_state

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        rng = np.random.default_rng(self.random_state)
        n = X.shape[0]
        self.estimators_ = []
        for _ in range(self.n_estimators):
            rows = rng.integers(0, n, n)
            tree = DecisionTreeRegressor(max_depth=self.max_depth,
                                         random_state=int(rng.integers(2**31)))
            self.estimators_.append(tree.fit(X[rows], y[rows]))
        return self

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        return np.mean([t.predict(X) for t in self.estimators_], axis=0)


def regressor_family(seed: int, trees: int = 10, depth: int = 5) -> dict:
    return {
        "least-squares": LinearRegression(),
        "ridge": Ridge(alpha=1.0),
        "lasso": Lasso(alpha=0.1, max_iter=5000),
        "bayesian-ridge": BayesianRidge(),
        "sgd": make_pipeline(StandardScaler(),
                             SGDRegressor(max_iter=2000, tol=1e-6, random_state=seed)),
        "random-forest": BaggedTrees(trees, depth, seed),
    }


def select_regressor(X, y, folds: int, seed: int, trees: int = 10, depth: int = 5):
    """Pick the family member with the lowest k-fold mean squared error.

    Folds are contiguous blocks; ``folds`` shrinks to the number of rows when
    data are scarce.  Returns ``(name, fitted_estimator, cv_errors)``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite training data")
    n = X.shape[0]
    k = min(folds, n)
    if k < 2:
        raise ValueError("need at least two observations to cross-validate")
    bounds = np.linspace(0, n, k + 1).astype(int)
    errors = {}
    # inputs are validated here once; skip sklearn's per-call checks
    with warnings.catch_warnings(), sklearn.config_context(
            assume_finite=True, skip_parameter_validation=True):
        warnings.simplefilter("ignore", ConvergenceWarning)
        for name, est in regressor_family(seed, trees, depth).items():
            sse = 0.0
            for lo, hi in zip(bounds[:-1], bounds[1:]):
                train = np.r_[0:lo, hi:n]
                est.fit(X[train], y[train])
                r = y[lo:hi] - est.predict(X[lo:hi])
                sse += float(r @ r)
            errors[name] = sse / n
        best = min(errors, key=lambda name: (errors[name], list(errors).index(name)))
        est = regressor_family(seed, trees, depth)[best]
        est.fit(X, y)
    return best, est, errors


def linear_coefficients(estimator):
    """``(intercept, coef)`` of a fitted linear model or scaler+linear pipeline, else None."""
    if isinstance(estimator, Pipeline):
        scaler, last = estimator.steps[0][1], estimator.steps[-1][1]
        if len(estimator.steps) != 2 or not isinstance(scaler, StandardScaler):
            return None
        inner = linear_coefficients(last)
        if inner is None:
            return None
        b0, w = inner
        w = w / scaler.scale_
        return b0 - float(w @ scaler.mean_), w
    if hasattr(estimator, "coef_") and hasattr(estimator, "intercept_"):
        return float(np.ravel(estimator.intercept_)[0]), np.asarray(estimator.coef_, float).ravel()
    return None


def optimize_price(estimator, competitor_forecast, step: float = 0.1,
                   price_max: float = 100.0) -> float:
    grid = np.arange(1, int(round(price_max / step)) + 1) * step
    comp = np.asarray(competitor_forecast, dtype=float)
    lin = linear_coefficients(estimator)
    if lin is not None:
        b0, w = lin
        demand = b0 + float(w[1:] @ comp) + w[0] * grid
    else:
        X = np.column_stack([grid, np.broadcast_to(comp, (grid.shape[0], comp.shape[0]))])
        with sklearn.config_context(assume_finite=True):
            demand = estimator.predict(X)
    demand = np.maximum(demand, 0.0)
    return float(grid[int(np.argmax(grid * demand))])


def cosine_price(center: float, step: int, amplitude: float, period: int) -> float:
    return center * (1.0 + amplitude * math.cos(2.0 * math.pi * step / period))


class Ml(Strategy):
    name = "ml"

    @classmethod
    def default_params(cls):
        return MlParams()

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        p = self.params
        self.mode = "explore"
        self.step = 0
        self.data_start = 0
        self.center = float(self.rng.uniform(p.first_low, p.first_high))
        self.estimator = None
        self.model_name: str | None = None
        self.exploit_length = 0
        self.exploit_start = 0
        self.comp_level: np.ndarray | None = None

    def _start_exploration(self, obs: Observation) -> float:
        p = self.params
        self.mode = "explore"
        self.step = 0
        self.data_start = obs.t
        if obs.t > 0:
            self.center = max(float(obs.prices[-p.explore_length:].mean()), 1.0)
        return self._explore_price()

    def _explore_price(self) -> float:
        p = self.params
        price = cosine_price(self.center, self.step, p.amplitude, p.cosine_period)
        self.step += 1
        return max(price, 0.0)

    def _start_exploitation(self, obs: Observation) -> bool:
        p = self.params
        X = obs.prices[self.data_start:]
        X = np.column_stack([X[:, self.own_index], np.delete(X, self.own_index, axis=1)])
        y = obs.own_sales[self.data_start:].astype(float)
        try:
            self.spend(X.shape[0] * 6 * (p.folds + 1))
            self.model_name, self.estimator, _ = select_regressor(
                X, y, p.folds, int(self.rng.integers(2**31)), p.forest_trees, p.forest_depth)
        except ValueError as exc:
            log.debug("ml model selection failed: %s", exc)
            return False
        self.mode = "exploit"
        self.step = 0
        self.exploit_start = obs.t
        self.exploit_length = int(self.rng.integers(p.exploit_min, p.exploit_max + 1))
        return True

    def _revenue_collapsed(self, obs: Observation) -> bool:
        w = self.params.abort_window
        if self.step < 2 * w:
            return False
        own = obs.own_prices[self.exploit_start:] * obs.own_sales[self.exploit_start:]
        opening = float(own[:w].mean())
        return opening > 0 and float(own[-w:].mean()) < self.params.abort_fraction * opening

    def next_price(self, obs: Observation) -> float:
        p = self.params
        if obs.t > 0:
            comp = np.delete(obs.prices[-1], self.own_index)
            if self.comp_level is None:
                self.comp_level = comp.astype(float)
            else:
                self.comp_level = p.smoothing * comp + (1 - p.smoothing) * self.comp_level
        if self.mode == "explore":
            if self.step < p.explore_length:
                return self._explore_price()
            if not self._start_exploitation(obs):
                return self._start_exploration(obs)
        if self.step >= self.exploit_length or self._revenue_collapsed(obs):
            return self._start_exploration(obs)
        self.step += 1
        return optimize_price(self.estimator, self.comp_level, p.price_step, p.price_max)
