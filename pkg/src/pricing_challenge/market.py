"""Ground-truth market: per-simulation parameters and per-period sales.

Three customer segments arrive each period:

* shoppers buy from the cheapest competitor when their exponential WTP
  exceeds the lowest price (ties split uniformly at random);
* loyals are bound to a uniformly chosen competitor and buy when their
  exponential WTP exceeds that competitor's price;
* scientists (PhDs and professors) choose via a multinomial logit with a
  no-purchase option, whose slope is calibrated with Lambert W so that a
  chosen symmetric price maximizes total revenue.

Per-customer WTP comparisons are realized through their exact count
distributions (binomial thinning of the segment arrivals), which is equal in
law to drawing one WTP per customer and much cheaper.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from .stochastic import ParameterError, as_generator, lambert_w

SEGMENTS = ("sho", "loy", "sci")


def logit_slope(alpha: float, target_price: float, n: int) -> float:
    """Slope that makes ``target_price`` the revenue-optimal symmetric price."""
    return (lambert_w(n * math.exp(alpha - 1.0)) + 1.0) / target_price


@dataclass
class MarketParams:
    lam: float
    theta_sho: float
    theta_loy: float
    theta_sci: float
    gamma_phd: float
    gamma_prof: float
    beta_sho: float
    beta_loy: float
    alpha_phd: float
    alpha_prof: float
    p_phd: float
    p_prof: float
    beta_phd_by_n: dict[int, float] = field(default_factory=dict)
    beta_prof_by_n: dict[int, float] = field(default_factory=dict)

    @property
    def theta(self) -> np.ndarray:
        return np.array([self.theta_sho, self.theta_loy, self.theta_sci])

    def slopes(self, n: int) -> tuple[float, float]:
        """Logit slopes (PhD, professor) for a market with ``n`` competitors."""
        if n not in self.beta_phd_by_n:
            self.beta_phd_by_n[n] = logit_slope(self.alpha_phd, self.p_phd, n)
            self.beta_prof_by_n[n] = logit_slope(self.alpha_prof, self.p_prof, n)
        return self.beta_phd_by_n[n], self.beta_prof_by_n[n]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["beta_phd_by_n"] = {str(k): v for k, v in sorted(self.beta_phd_by_n.items())}
        d["beta_prof_by_n"] = {str(k): v for k, v in sorted(self.beta_prof_by_n.items())}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MarketParams":
        d = dict(d)
        d["beta_phd_by_n"] = {int(k): float(v) for k, v in d.get("beta_phd_by_n", {}).items()}
        d["beta_prof_by_n"] = {int(k): float(v) for k, v in d.get("beta_prof_by_n", {}).items()}
        return cls(**d)


def sample_market_params(m: int, rng) -> MarketParams:
    """Draw one simulation's ground truth for a roster of ``m`` competitors.

    Segment shares are uniform on the simplex and the PhD share is uniform on
    (0, 1); both are modelling choices, the rest follows the contest recipe.
    """
    if m < 2:
        raise ParameterError(f"market size must be >= 2, got {m}")
    g = as_generator(rng)
    lam = float(g.uniform(50.0, 150.0))
    theta = np.asarray(g.dirichlet([1.0, 1.0, 1.0]), dtype=float)
    theta = theta / theta.sum()
    gamma_phd = float(g.uniform(0.0, 1.0))
    beta_sho = float(g.uniform(5.0, 15.0))
    beta_loy = float(g.uniform(1.5, 2.0)) * beta_sho
    alpha_phd = beta_sho
    p_phd = beta_sho * float(g.uniform(0.5, 1.5))
    alpha_prof = alpha_phd * float(g.uniform(1.0, 1.25))
    p_prof = p_phd * float(g.uniform(1.0, 1.5))
    params = MarketParams(
        lam=lam,
        theta_sho=float(theta[0]),
        theta_loy=float(theta[1]),
        theta_sci=float(1.0 - theta[0] - theta[1]),
        gamma_phd=gamma_phd,
        gamma_prof=1.0 - gamma_phd,
        beta_sho=beta_sho,
        beta_loy=beta_loy,
        alpha_phd=alpha_phd,
        alpha_prof=alpha_prof,
        p_phd=p_phd,
        p_prof=p_prof,
    )
    for n in sorted({2, m}):
        params.slopes(n)
    return params


class PeriodArrivals(NamedTuple):
    n_sho: int
    n_loy: int
    n_phd: int
    n_prof: int

    @property
    def n_sci(self) -> int:
        return self.n_phd + self.n_prof


class PeriodOutcome(NamedTuple):
    arrivals: PeriodArrivals
    sales: np.ndarray  # (n, 3) int: shopper, loyal, scientist sales per competitor
    revenue: np.ndarray  # (n,) float


def sample_arrivals(params: MarketParams, rng) -> PeriodArrivals:
    g = as_generator(rng)
    n = g.poisson(params.lam)
    n_sho, n_loy, n_sci = g.multinomial(n, params.theta)
    n_phd = g.binomial(n_sci, params.gamma_phd) if n_sci else 0
    return PeriodArrivals(int(n_sho), int(n_loy), int(n_phd), int(n_sci - n_phd))


def realize_shopper_sales(prices, n_sho: int, beta_sho: float, rng) -> np.ndarray:
    g = as_generator(rng)
    prices = np.asarray(prices, dtype=float)
    out = np.zeros(prices.shape[0], dtype=np.int64)
    if n_sho == 0:
        return out
    pmin = prices.min()
    buyers = g.binomial(n_sho, math.exp(-pmin / beta_sho))
    if buyers:
        low = np.flatnonzero(prices == pmin)
        if low.size == 1:
            out[low[0]] = buyers
        else:
            out[low] = g.multinomial(buyers, np.full(low.size, 1.0 / low.size))
    return out


def realize_loyal_sales(prices, n_loy: int, beta_loy: float, rng) -> np.ndarray:
    g = as_generator(rng)
    prices = np.asarray(prices, dtype=float)
    n = prices.shape[0]
    if n_loy == 0:
        return np.zeros(n, dtype=np.int64)
    assigned = g.multinomial(n_loy, np.full(n, 1.0 / n))
    return g.binomial(assigned, np.exp(-prices / beta_loy)).astype(np.int64)


def scientist_choice_probs(prices, alpha: float, beta_n: float) -> tuple[np.ndarray, float]:
    """Logit purchase probabilities per competitor and the no-purchase probability."""
    u = alpha - beta_n * np.asarray(prices, dtype=float)
    top = max(float(u.max()), 0.0)
    e = np.exp(u - top)
    e0 = math.exp(-top)
    denom = e0 + e.sum()
    return e / denom, e0 / denom


def _logit_draw(g, count: int, prices, alpha: float, beta_n: float) -> np.ndarray:
    q, q0 = scientist_choice_probs(prices, alpha, beta_n)
    return g.multinomial(count, np.append(q, q0))[:-1]


def realize_scientist_sales(prices, n_phd: int, n_prof: int, params: MarketParams,
                            n: int, rng) -> np.ndarray:
    g = as_generator(rng)
    prices = np.asarray(prices, dtype=float)
    b_phd, b_prof = params.slopes(n)
    out = np.zeros(prices.shape[0], dtype=np.int64)
    if n_phd:
        out += _logit_draw(g, n_phd, prices, params.alpha_phd, b_phd)
    if n_prof:
        out += _logit_draw(g, n_prof, prices, params.alpha_prof, b_prof)
    return out


def realize_period(prices, params: MarketParams, n: int, rng) -> PeriodOutcome:
    """Arrivals plus sales of every segment for one period.

    ``prices`` must already be sanitized (finite, >= 0) and of length ``n``.
    """
    g = as_generator(rng)
    prices = np.asarray(prices, dtype=float)
    assert prices.shape == (n,) and np.all(prices >= 0.0), "unsanitized prices"
    arr = sample_arrivals(params, g)
    sales = np.empty((n, 3), dtype=np.int64)
    sales[:, 0] = realize_shopper_sales(prices, arr.n_sho, params.beta_sho, g)
    sales[:, 1] = realize_loyal_sales(prices, arr.n_loy, params.beta_loy, g)
    sales[:, 2] = realize_scientist_sales(prices, arr.n_phd, arr.n_prof, params, n, g)
    revenue = prices * sales.sum(axis=1)
    return PeriodOutcome(arr, sales, revenue)


def expected_sales(prices, params: MarketParams, n: int) -> np.ndarray:
    """Closed-form expected per-segment sales per period, shape ``(n, 3)``."""
    prices = np.asarray(prices, dtype=float)
    lam = params.lam
    out = np.zeros((n, 3))
    pmin = prices.min()
    low = prices == pmin
    out[low, 0] = lam * params.theta_sho * math.exp(-pmin / params.beta_sho) / low.sum()
    out[:, 1] = lam * params.theta_loy / n * np.exp(-prices / params.beta_loy)
    b_phd, b_prof = params.slopes(n)
    q_phd, _ = scientist_choice_probs(prices, params.alpha_phd, b_phd)
    q_prof, _ = scientist_choice_probs(prices, params.alpha_prof, b_prof)
    sci = lam * params.theta_sci
    out[:, 2] = sci * (params.gamma_phd * q_phd + params.gamma_prof * q_prof)
    return out
