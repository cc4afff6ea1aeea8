"""Bandit whose arms are demand models fitted by simulated annealing.

Arms 0-2 are parametric choice models evaluated on the forecast competitor
price profile; arm 3 is a plain epsilon-greedy grid bandit.

Model 1 (bargain hunters): normal WTP; among prices below WTP the choice
weight is ``((WTP - p) / WTP) ** b``.
Model 2 (quality seekers): same, with weight ``(p / WTP) ** c``.
Model 3 (cheapest visible): each customer sees a random subset of size
uniform on ``{d..e}`` and buys the cheapest visible price if it is below WTP.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import ndtr, ndtri

from .bandits import ArmTable, epsilon_greedy, last_revenue
from .base import Observation, Strategy
from .params import BanditModelParams

log = logging.getLogger(__name__)

MODEL_IDS = (1, 2, 3)


@dataclass(frozen=True)
class ChoiceModel:
    model_id: int
    scale: float = 1.0  # expected arrivals per period
    mu: float = 30.0  # WTP mean
    sigma: float = 15.0  # WTP standard deviation
    b: float = 1.0
    c: float = 1.0
    d: int = 1
    e: int = 2


@dataclass
class BModelParams:
    models: dict[int, ChoiceModel] = field(
        default_factory=lambda: {i: ChoiceModel(i) for i in MODEL_IDS})
    arm_table: ArmTable = field(default_factory=lambda: ArmTable(4))
    fitted: bool = False


def wtp_nodes(mu: float, sigma: float, k: int) -> np.ndarray:
    """Equal-probability quadrature nodes of ``N(mu, sigma)``."""
    return mu + sigma * ndtri((np.arange(k) + 0.5) / k)


def _choice_weights(model: ChoiceModel, prices: np.ndarray, w: np.ndarray):
    """Choice weights ``(..., Q)`` and affordability mask for ``prices`` ``(...)``."""
    ratio = prices[..., None] * (1.0 / w)
    ok = ratio < 1.0
    # masked entries are set to 1.0 before the power: pow(0, x) is a slow path
    if model.model_id == 1:
        val = np.power(np.where(ok, 1.0 - ratio, 1.0), model.b)
    else:
        ok &= ratio > 0
        val = np.power(np.where(ok, ratio, 1.0), model.c)
    val *= ok
    return val


def _weighted_share(model: ChoiceModel, own: np.ndarray, comp: np.ndarray,
                    nodes: int) -> np.ndarray:
    """Own purchase share for ``own`` ``(M,)`` against ``comp`` ``(k, M)`` or ``(k, 1)``."""
    w = wtp_nodes(model.mu, model.sigma, nodes)
    w = w[w > 0]  # customers with non-positive WTP never buy
    if w.shape[0] == 0:
        return np.zeros(own.shape[0])
    v_own = _choice_weights(model, own, w)  # (M, Q)
    total = v_own + _choice_weights(model, comp, w).sum(axis=0)
    share = v_own / np.where(total > 0, total, np.inf)
    if model.model_id == 2:
        zero = total <= 0
        if zero.any():
            # only zero prices are affordable: split evenly among them
            n_free = (own == 0) + (comp == 0).sum(axis=0)
            even = (own == 0) / np.maximum(n_free, 1)
            share = np.where(zero, even[:, None], share)
    return share.sum(axis=-1) / nodes


_COMB = np.array([[math.comb(n, k) for k in range(32)] for n in range(32)], dtype=float)


def _subset_share(model: ChoiceModel, own: np.ndarray, comp: np.ndarray) -> np.ndarray:
    n = comp.shape[-1] + 1
    if comp.ndim == 1:
        comp = comp[None, :]
    cheaper = (comp < own[:, None]).sum(axis=1)
    tied = (comp == own[:, None]).sum(axis=1)
    dearer = n - 1 - cheaper - tied
    d = min(max(model.d, 1), n)
    e = min(max(model.e, d), n)
    prob = np.zeros(own.shape[0])
    for s in range(d, e + 1):
        total = _COMB[n, s]
        for j in range(0, min(s - 1, int(tied.max())) + 1):
            rest = s - 1 - j
            if rest < 0:
                continue
            ways = _COMB[tied, j] * _COMB[dearer, rest]
            prob += ways / total / (j + 1)
    prob /= e - d + 1
    afford = ndtr((model.mu - own) / model.sigma)
    return prob * afford


def purchase_share(model: ChoiceModel, own, comp, nodes: int = 16) -> np.ndarray:
    """Probability that one arrival buys at ``own`` given competitor prices.

    ``own``: ``(M,)``.  ``comp``: ``(M, k)`` per-row profiles or ``(k,)`` shared.
    """
    own = np.atleast_1d(np.asarray(own, dtype=float))
    comp = np.asarray(comp, dtype=float)
    if model.model_id == 3:
        return _subset_share(model, own, comp)
    comp = comp[:, None] if comp.ndim == 1 else comp.T
    return _weighted_share(model, own, comp, nodes)


def bmodel_eval_demand(model_id: int, own_price: float, profile, params: BModelParams,
                       nodes: int = 16) -> float:
    """Expected revenue per period at ``own_price`` under one demand model."""
    m = params.models[model_id]
    share = purchase_share(m, [own_price], np.sort(np.asarray(profile, dtype=float)), nodes)
    return float(own_price * m.scale * share[0])


def simulate_choice(model: ChoiceModel, own: float, comp, draws: int, rng) -> float:
    """Monte-Carlo purchase share of one model, straight from its description."""
    prices = np.concatenate([[own], np.asarray(comp, dtype=float)])
    n = prices.shape[0]
    hits = 0
    wtp = rng.normal(model.mu, model.sigma, draws)
    for w in wtp:
        if w <= 0:
            continue
        if model.model_id == 3:
            size = rng.integers(model.d, model.e + 1)
            seen = rng.choice(n, size=size, replace=False)
            low = prices[seen].min()
            if low >= w:
                continue
            cands = seen[prices[seen] == low]
            hits += rng.choice(cands) == 0
            continue
        ok = prices < w
        if not ok[0]:
            continue
        if model.model_id == 1:
            wt = np.where(ok, np.maximum((w - prices) / w, 0.0) ** model.b, 0.0)
        else:
            wt = np.where(ok, (prices / w) ** model.c, 0.0)
        if wt.sum() <= 0:
            wt = ok.astype(float)
        hits += rng.random() < wt[0] / wt.sum()
    return hits / draws


# ---------------------------------------------------------------------------
# Simulated annealing fit
# ---------------------------------------------------------------------------

def _free_params(model_id: int) -> list[str]:
    base = ["mu", "log_sigma"]
    return base + {1: ["log_b"], 2: ["log_c"], 3: ["d", "e"]}[model_id]


_STEPS = {"mu": 5.0, "log_sigma": 0.3, "log_b": 0.3, "log_c": 0.3}


def _to_model(model_id: int, x: dict) -> ChoiceModel:
    return ChoiceModel(
        model_id, mu=x["mu"], sigma=math.exp(x["log_sigma"]),
        b=math.exp(x.get("log_b", 0.0)), c=math.exp(x.get("log_c", 0.0)),
        d=int(x.get("d", 1)), e=int(x.get("e", 2)))


def _sse(model: ChoiceModel, own, comp, sales, nodes) -> tuple[float, float]:
    f = purchase_share(model, own, comp, nodes)
    ff = float(f @ f)
    scale = max(float(f @ sales) / ff, 0.0) if ff > 0 else 0.0
    r = sales - scale * f
    return float(r @ r), scale


def anneal_model(model_id: int, own_prices, profiles, sales, rng, proposals: int = 667,
                 cooling: float = 0.95, block: int = 20, t0: float = 0.05,
                 nodes: int = 16, spend=None) -> tuple[ChoiceModel, float]:
    """Fit one demand model by simulated annealing on normalized squared error.

    The arrival scale enters linearly and is solved in closed form for every
    proposal.  Returns the best model and its normalized error.
    """
    own = np.asarray(own_prices, dtype=float)
    comp = np.asarray(profiles, dtype=float)
    if comp.ndim == 1:
        comp = comp[:, None]
    y = np.asarray(sales, dtype=float)
    n = comp.shape[1] + 1
    norm = max(float(y @ y), 1e-12)
    all_prices = np.concatenate([own, comp.ravel()])
    x = {"mu": float(all_prices.mean()) + 1.0,
         "log_sigma": math.log(float(all_prices.std()) + 1.0)}
    if model_id == 1:
        x["log_b"] = 0.0
    elif model_id == 2:
        x["log_c"] = 0.0
    else:
        x["d"], x["e"] = 1, n
    names = _free_params(model_id)

    def energy(state):
        sse, scale = _sse(_to_model(model_id, state), own, comp, y, nodes)
        return sse / norm, scale

    cur_e, cur_scale = energy(x)
    best, best_e, best_scale = dict(x), cur_e, cur_scale
    for k in range(proposals):
        if spend is not None:
            spend(own.shape[0])
        temp = t0 * cooling ** (k // block)
        name = names[int(rng.integers(len(names)))]
        cand = dict(x)
        if name in ("d", "e"):
            cand[name] += 1 if rng.random() < 0.5 else -1
            if not 1 <= cand["d"] <= cand["e"] <= n:
                continue
        else:
            cand[name] += _STEPS[name] * max(temp / t0, 0.05) * rng.standard_normal()
            cand["log_sigma"] = min(max(cand["log_sigma"], -3.0), 6.0)
            for key in ("log_b", "log_c"):
                if key in cand:
                    cand[key] = min(max(cand[key], -5.0), 5.0)
        e_new, s_new = energy(cand)
        if not math.isfinite(e_new):
            continue
        if e_new <= cur_e or rng.random() < math.exp(-(e_new - cur_e) / max(temp, 1e-12)):
            x, cur_e, cur_scale = cand, e_new, s_new
            if cur_e < best_e:
                best, best_e, best_scale = dict(x), cur_e, cur_scale
    return replace(_to_model(model_id, best), scale=best_scale), best_e


class HoltForecaster:
    """Level + trend exponential smoothing of a vector series."""

    def __init__(self, alpha: float, beta: float):
        self.alpha = alpha
        self.beta = beta
        self.level: np.ndarray | None = None
        self.trend: np.ndarray | None = None

    def update(self, x) -> None:
        x = np.asarray(x, dtype=float)
        if self.level is None:
            self.level = x.copy()
            self.trend = np.zeros_like(x)
            return
        prev = self.level
        self.level = self.alpha * x + (1 - self.alpha) * (prev + self.trend)
        self.trend = self.beta * (self.level - prev) + (1 - self.beta) * self.trend

    def forecast(self, steps: int = 1) -> np.ndarray:
        return self.level + steps * self.trend


class BanditModel(Strategy):
    name = "b-model"

    @classmethod
    def default_params(cls):
        return BanditModelParams()

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        p = self.params
        self.state = BModelParams()
        self.grid_prices = np.asarray(p.grid, dtype=float)
        self.grid_table = ArmTable(self.grid_prices.shape[0])
        self.profile_forecast = HoltForecaster(p.level_smoothing, p.trend_smoothing)
        self.candidates = np.arange(1, int(round(p.price_max / p.price_step)) + 1) * p.price_step
        self.last_arm: int | None = None
        self.last_grid_arm: int | None = None

    def fit(self, own, profiles, sales) -> None:
        p = self.params
        per_model = max(1, p.anneal_proposals // len(MODEL_IDS))
        models = dict(self.state.models)
        for mid in MODEL_IDS:
            try:
                m, err = anneal_model(mid, own, profiles, sales, self.rng, per_model,
                                      p.anneal_cooling, p.anneal_block, p.anneal_t0,
                                      p.wtp_nodes, self.spend)
            except FloatingPointError:
                log.debug("annealing failed for model %d; keeping previous parameters", mid)
                continue
            if math.isfinite(err):
                models[mid] = m
        self.state.models = models
        self.state.fitted = True
        self.state.arm_table.reset()

    def best_price(self, model_id: int, profile: np.ndarray) -> float:
        m = self.state.models[model_id]
        share = purchase_share(m, self.candidates, profile, self.params.wtp_nodes)
        return float(self.candidates[int(np.argmax(self.candidates * share))])

    def next_price(self, obs: Observation) -> float:
        p = self.params
        if obs.t > 0:
            self.profile_forecast.update(np.sort(np.delete(obs.prices[-1], self.own_index)))
            if self.last_arm is not None:
                rev = last_revenue(obs)
                self.state.arm_table.update(self.last_arm, rev)
                if self.last_arm == 3 and self.last_grid_arm is not None:
                    self.grid_table.update(self.last_grid_arm, rev)
        if obs.t < p.explore_periods:
            return float(self.rng.uniform(0.0, p.explore_high))
        if not self.state.fitted:
            profiles = np.sort(obs.competitor_prices, axis=1)
            self.fit(obs.own_prices, profiles, obs.own_sales)
        arm = epsilon_greedy(self.state.arm_table.means, p.epsilon, self.rng)
        self.last_arm = arm
        if arm == 3:
            g = epsilon_greedy(self.grid_table.means, p.epsilon, self.rng)
            self.last_grid_arm = g
            return float(self.grid_prices[g])
        profile = np.maximum(self.profile_forecast.forecast(), 0.0)
        return self.best_price(MODEL_IDS[arm], profile)
