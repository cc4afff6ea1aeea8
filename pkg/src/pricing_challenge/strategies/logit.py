"""Finite-mixture logit over the number of arriving customers.

Latent per period: the number of arrivals ``N``.  Given ``N``, each arrival
buys from us with logit probability ``q(a_g, b_g)`` where utility is
``a - b * price`` and ``g`` is the bucket of arrival counts ``N`` falls in.
Own sales are then ``Binomial(N, q)``.  EM alternates posterior weights over
``N`` with Fisher-scoring updates of each bucket's ``(a, b)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from ..stochastic import fit_mvn, sample_mvn
from .base import Observation, Strategy
from .params import LogitParams

log = logging.getLogger(__name__)

A_BOUNDS = (-30.0, 60.0)
B_BOUNDS = (1e-4, 20.0)
MAX_SUPPORT = 200


@dataclass
class MixtureLogitModel:
    support: np.ndarray  # arrival counts N with positive prior mass allowed
    group_of: np.ndarray  # bucket index for every support point
    pi: np.ndarray  # probability of each support point
    a: np.ndarray  # per-bucket intercept
    b: np.ndarray  # per-bucket slope
    loglik: float = -np.inf
    converged: bool = False

    @property
    def upper(self) -> int:
        return int(self.support[-1])

    def group_weights(self) -> np.ndarray:
        """Expected arrivals attributed to each bucket."""
        return np.bincount(self.group_of, weights=self.pi * self.support,
                           minlength=self.a.shape[0])

    def expected_sales(self, own_price, competitor_samples) -> np.ndarray:
        """Mean own sales for each own price, averaged over competitor draws.

        ``own_price`` has shape ``(P,)``; ``competitor_samples`` ``(S, k)``.
        """
        own_price = np.asarray(own_price, dtype=float)
        comp = np.asarray(competitor_samples, dtype=float)
        w = self.group_weights()
        total = np.zeros(own_price.shape[0])
        active = w > 1e-3 * max(w.sum(), 1e-300)
        avg = np.full(comp.shape[0], 1.0 / comp.shape[0])
        for g in np.flatnonzero(active):
            a, b = self.a[g], self.b[g]
            rest = 1.0 + np.exp(np.minimum(a - b * comp, 700.0)).sum(axis=1)  # (S,)
            own = np.exp(np.minimum(a - b * own_price, 700.0))  # (P,)
            # q = own / (own + rest); average over draws as own * mean(1 / (own + rest))
            inv = np.add.outer(own, rest)
            np.reciprocal(inv, out=inv)
            total += w[g] * own * (inv @ avg)
        return total


def _own_logit(a, b, own_price, comp_prices):
    """Stable ``q``, ``q0`` and ``sum_j y_j e^{u_j} / D`` for every (t, group).

    ``a``/``b``: ``(G,)``; ``own_price``: ``(T,)``; ``comp_prices``: ``(T, k)``.
    """
    u_own = a[None, :] - b[None, :] * own_price[:, None]  # (T, G)
    u_comp = a[None, :, None] - b[None, :, None] * comp_prices[:, None, :]  # (T, G, k)
    top = np.maximum(np.maximum(u_own, u_comp.max(axis=2)), 0.0)
    e_own = np.exp(u_own - top)
    e_comp = np.exp(u_comp - top[:, :, None])
    e0 = np.exp(-top)
    denom = e0 + e_own + e_comp.sum(axis=2)
    q = e_own / denom
    y_term = (e_comp * comp_prices[:, None, :]).sum(axis=2) / denom
    return q, e0 / denom, y_term


def _support(upper: int) -> np.ndarray:
    step = max(1, int(np.ceil((upper + 1) / MAX_SUPPORT)))
    s = np.arange(0, upper + 1, step)
    if s[-1] != upper:
        s = np.append(s, upper)
    return s


def _groups(support: np.ndarray, n_groups: int) -> np.ndarray:
    g = min(n_groups, support.shape[0])
    return (np.arange(support.shape[0]) * g) // support.shape[0]


def initial_model(upper: int, n_groups: int) -> MixtureLogitModel:
    support = _support(upper)
    group_of = _groups(support, n_groups)
    g = int(group_of[-1]) + 1
    pi = np.full(support.shape[0], 1.0 / support.shape[0])
    return MixtureLogitModel(support, group_of, pi, np.full(g, 1.0), np.full(g, 0.1))


def fit_mixture_logit(own_prices, competitor_prices, sales, upper: int | None = None,
                      n_groups: int = 10, iterations: int = 30, tol: float = 1e-6,
                      scoring_steps: int = 3, init: MixtureLogitModel | None = None,
                      spend=None) -> MixtureLogitModel:
    """EM for the arrival-count mixture of own-sales logit models."""
    p = np.asarray(own_prices, dtype=float)
    y = np.asarray(competitor_prices, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    d = np.asarray(sales, dtype=float)
    if upper is None:
        upper = int(np.ceil(d.max())) * (y.shape[1] + 2)
    upper = max(int(upper), int(np.ceil(d.max())), 1)
    model = init if init is not None and init.upper >= d.max() else initial_model(upper, n_groups)
    support = model.support.astype(float)
    gidx = model.group_of
    starts = np.flatnonzero(np.diff(gidx, prepend=-1))
    feasible = support[None, :] >= d[:, None]
    log_binom = np.where(
        feasible,
        gammaln(support[None, :] + 1) - gammaln(d[:, None] + 1)
        - gammaln(np.maximum(support[None, :] - d[:, None], 0.0) + 1),
        -np.inf,
    )
    a, b, pi = model.a.copy(), model.b.copy(), model.pi.copy()
    prev = -np.inf
    converged = False
    ll = prev
    for _ in range(iterations):
        if spend is not None:
            spend(log_binom.size)
        q, _, _ = _own_logit(a, b, p, y)
        q = np.clip(q, 1e-300, 1.0 - 1e-16)
        lq, l1q = np.log(q), np.log1p(-q)
        # E-step over arrival counts:
        # log C(N, d) + d log q + (N - d) log(1 - q) + log pi(N)
        with np.errstate(divide="ignore", invalid="ignore"):
            lp = (d[:, None] * (lq - l1q))[:, gidx]
            lp += l1q[:, gidx] * support
            lp += log_binom
            lp += np.log(pi)
        top = lp.max(axis=1, keepdims=True)
        top[~np.isfinite(top)] = 0.0
        lp -= top
        r = np.exp(lp, out=lp)
        norm = r.sum(axis=1, keepdims=True)
        ll = float((np.log(norm) + top).sum())
        r /= norm
        pi = r.mean(axis=0)
        pi = np.maximum(pi, 1e-300)
        pi /= pi.sum()
        mass = np.add.reduceat(r, starts, axis=1)
        arrivals = np.add.reduceat(r * support[None, :], starts, axis=1)
        # M-step: Fisher scoring on (a, b) for every bucket at once
        for _ in range(scoring_steps):
            q, q0, yt = _own_logit(a, b, p, y)
            q = np.clip(q, 1e-12, 1.0 - 1e-12)
            var = q * (1.0 - q)
            ja = q * q0
            jb = q * (yt - p[:, None] * (1.0 - q))
            resid = (mass * d[:, None] - arrivals * q) / var
            info_w = arrivals / var
            sa, sb = (resid * ja).sum(0), (resid * jb).sum(0)
            iaa = (info_w * ja * ja).sum(0) + 1e-9
            iab = (info_w * ja * jb).sum(0)
            ibb = (info_w * jb * jb).sum(0) + 1e-9
            det = iaa * ibb - iab * iab
            ok = det > 1e-300
            da = np.where(ok, (ibb * sa - iab * sb) / np.where(ok, det, 1.0), 0.0)
            db = np.where(ok, (iaa * sb - iab * sa) / np.where(ok, det, 1.0), 0.0)
            a = np.clip(a + np.clip(da, -2.0, 2.0), *A_BOUNDS)
            b = np.clip(b + np.clip(db, -0.5, 0.5), *B_BOUNDS)
        if abs(ll - prev) <= tol * max(1.0, abs(ll)):
            converged = True
            break
        prev = ll
    if not converged:
        log.debug("mixture logit EM stopped at the iteration cap (loglik %.4f)", ll)
    return MixtureLogitModel(model.support, gidx, pi, a, b, ll, converged)


def refine_argmax(objective, grid: np.ndarray, stride: int = 5) -> int:
    """Index of the best grid point, searched coarse-to-fine.

    Evaluates every ``stride``-th point, then every point within one coarse
    step of the coarse winner.  Exact for unimodal objectives.
    """
    n = grid.shape[0]
    if n <= 4 * stride:
        return int(np.argmax(objective(grid)))
    coarse = np.arange(0, n, stride)
    if coarse[-1] != n - 1:
        coarse = np.append(coarse, n - 1)
    best = int(coarse[int(np.argmax(objective(grid[coarse])))])
    fine = np.arange(max(0, best - stride + 1), min(n, best + stride))
    return int(fine[int(np.argmax(objective(grid[fine])))])


class Logit(Strategy):
    """Mixture-logit learner with multivariate-normal competitor forecasts."""

    name = "logit"

    @classmethod
    def default_params(cls):
        return LogitParams()

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.model: MixtureLogitModel | None = None
        self.upper: int | None = None
        p = self.params
        self.grid = np.arange(1, int(round(p.price_max / p.price_step))) * p.price_step

    def _refit(self, obs: Observation, comp: np.ndarray) -> None:
        p = self.params
        first = self.model is None
        if first:
            self.upper = max(1, int(obs.own_sales.max()) * (self.n + 1))
        try:
            self.model = fit_mixture_logit(
                obs.own_prices, comp, obs.own_sales, self.upper, p.n_groups,
                p.em_iterations if first else p.em_refit_iterations, p.em_tol,
                p.scoring_steps, init=self.model, spend=self.spend)
        except FloatingPointError:
            log.debug("mixture logit refit failed; keeping previous parameters")

    def next_price(self, obs: Observation) -> float:
        p = self.params
        if obs.t == 0:
            return 0.0
        comp = obs.competitor_prices
        if obs.t < p.explore_periods:
            return float(comp[-1].min())
        if self.model is None or (obs.t - p.explore_periods) % p.refit_every == 0:
            self._refit(obs, comp)
        if self.model is None or obs.t < 2:
            return float(comp[-1].min())
        mvn = fit_mvn(np.sort(comp, axis=1))
        draws = np.maximum(sample_mvn(mvn, p.mvn_samples, self.rng), 0.0)
        self.spend(p.mvn_samples * self.grid.shape[0])
        model = self.model
        best = refine_argmax(lambda g: g * model.expected_sales(g, draws), self.grid)
        return float(self.grid[best])
