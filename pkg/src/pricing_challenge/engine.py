"""Competitions, simulations, tournaments and revenue-share scoring."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Sequence

import numpy as np

from .market import MarketParams, realize_period, sample_market_params
from .stochastic import RngStream
from .strategies import REGISTRY, Observation, StepBudget, Strategy, resolve_params

log = logging.getLogger(__name__)

DEFAULT_STEP_BUDGET = 10**9


def sanitize_price(raw) -> float:
    """Map a proposed price to what the market accepts: finite and >= 0."""
    try:
        price = float(raw)
    except (TypeError, ValueError):
        return 0.0
    if not math.isfinite(price) or price < 0.0:
        return 0.0
    return price


@dataclass(frozen=True)
class StrategySpec:
    """A named strategy plus its resolved hyperparameters; builds fresh instances."""

    name: str
    params: object = None

    @classmethod
    def from_name(cls, name: str, overrides: dict | None = None) -> "StrategySpec":
        return cls(name, resolve_params(name, overrides))

    def build(self, rng: np.random.Generator, n: int, own_index: int,
              budget: StepBudget | None = None) -> Strategy:
        return REGISTRY[self.name](rng, n, own_index, self.params, budget)


@dataclass
class CompetitionTrace:
    sim: int
    kind: str  # "duopoly" or "oligopoly"
    members: tuple[int, ...]  # roster slots competing, in market order
    prices: np.ndarray  # (T, n)
    sales: np.ndarray  # (T, n, 3) shopper / loyal / scientist
    arrivals: np.ndarray  # (T, 4) shopper / loyal / phd / prof
    failures: int = 0

    @property
    def comp_id(self) -> str:
        if self.kind == "oligopoly":
            return "oligopoly"
        return "duopoly-" + "-".join(str(m) for m in self.members)

    @property
    def periods(self) -> int:
        return self.prices.shape[0]

    def revenue_per_period(self) -> np.ndarray:
        return self.prices * self.sales.sum(axis=2)

    @property
    def revenue(self) -> np.ndarray:
        return self.revenue_per_period().sum(axis=0)


def run_competition(strategies: Sequence[Strategy], params: MarketParams, periods: int,
                    rng, budgets: Sequence[StepBudget] | None = None, sim: int = 0,
                    kind: str = "oligopoly", members: tuple[int, ...] | None = None
                    ) -> CompetitionTrace:
    """Run the post-price / realize-sales loop for ``periods`` periods.

    A strategy that raises (including exhausting its step budget) posts 0
    for that period and the competition carries on.
    """
    n = len(strategies)
    if n < 2:
        raise ValueError("a competition needs at least two strategies")
    if periods < 1:
        raise ValueError("periods must be >= 1")
    g = rng.generator if isinstance(rng, RngStream) else rng
    budgets = list(budgets) if budgets is not None else [s.budget for s in strategies]
    prices = np.zeros((periods, n))
    sales = np.zeros((periods, n, 3), dtype=np.int64)
    arrivals = np.zeros((periods, 4), dtype=np.int64)
    own_sales = [np.zeros(periods, dtype=np.int64) for _ in range(n)]
    ro_prices = prices.view()
    ro_prices.flags.writeable = False
    ro_sales = []
    for buf in own_sales:
        v = buf.view()
        v.flags.writeable = False
        ro_sales.append(v)
    failures = 0
    name = f"sim {sim} {kind} {members}"
    for t in range(periods):
        row = prices[t]
        hist = ro_prices[:t]
        for k, strat in enumerate(strategies):
            budgets[k].reset()
            try:
                row[k] = sanitize_price(strat.next_price(Observation(t, k, n, hist, ro_sales[k][:t])))
            except Exception as exc:  # contest robustness: any failure posts 0
                failures += 1
                row[k] = 0.0
                log.warning("%s: strategy %d (%s) failed in period %d: %r",
                            name, k, getattr(strat, "name", "?"), t + 1, exc)
        out = realize_period(row, params, n, g)
        sales[t] = out.sales
        arrivals[t] = out.arrivals
        period_sales = out.sales.sum(axis=1)
        for k in range(n):
            own_sales[k][t] = period_sales[k]
    return CompetitionTrace(sim, kind, tuple(members) if members else tuple(range(n)),
                            prices, sales, arrivals, failures)


@dataclass
class Scorecard:
    x: np.ndarray  # (m,) oligopoly revenue
    y: np.ndarray  # (m, m) duopoly revenue of row vs column
    x_bar: np.ndarray
    y_bar: np.ndarray
    final: np.ndarray
    fallback: tuple[str, ...] = ()


def _shares(values: np.ndarray, label: str, fallback: list) -> np.ndarray:
    total = values.sum()
    if total > 0:
        return values / total
    log.warning("zero total %s revenue; using equal shares", label)
    fallback.append(label)
    return np.full(values.shape[0], 1.0 / values.shape[0])


def score_simulation(y, x) -> Scorecard:
    """Oligopoly, duopoly and final revenue shares of one simulation.

    ``y[j, k]`` is competitor ``j``'s revenue in its duopoly against ``k``
    (diagonal ignored); ``x[j]`` its oligopoly revenue.
    """
    x = np.asarray(x, dtype=float)
    y = np.array(y, dtype=float)
    if np.any(x < 0) or np.any(y < 0):
        raise ValueError("revenues must be non-negative")
    np.fill_diagonal(y, 0.0)
    fb: list[str] = []
    x_bar = _shares(x, "oligopoly", fb)
    y_bar = _shares(y.sum(axis=1), "duopoly", fb)
    return Scorecard(x, y, x_bar, y_bar, 0.5 * (x_bar + y_bar), tuple(fb))


@dataclass
class EngineConfig:
    seed: int = 0
    periods: int = 1000
    step_budget: int | None = DEFAULT_STEP_BUDGET


@dataclass
class SimulationResult:
    sim: int
    params: MarketParams
    duopolies: list[CompetitionTrace]
    oligopoly: CompetitionTrace
    roster: tuple[str, ...] = ()
    scorecard: Scorecard | None = None

    @property
    def traces(self) -> list[CompetitionTrace]:
        return self.duopolies + [self.oligopoly]


def simulation_stream(seed: int, sim: int) -> RngStream:
    return RngStream(seed, ("sim", sim))


def _build(specs, slots, stream: RngStream, limit):
    strats = []
    for pos, slot in enumerate(slots):
        budget = StepBudget(limit)
        strats.append(specs[slot].build(stream.child("strategy", pos).generator,
                                        len(slots), pos, budget))
    return strats


def run_simulation(specs: Sequence[StrategySpec], sim_index: int,
                   config: EngineConfig) -> SimulationResult:
    """All pairwise duopolies plus one oligopoly on one market draw."""
    m = len(specs)
    if m < 2:
        raise ValueError("roster needs at least two strategies")
    root = simulation_stream(config.seed, sim_index)
    params = sample_market_params(m, root.child("market-params").generator)
    duopolies = []
    for j, k in combinations(range(m), 2):
        stream = root.child("duopoly", j, k)
        strats = _build(specs, (j, k), stream, config.step_budget)
        duopolies.append(run_competition(strats, params, config.periods,
                                         stream.child("demand").generator,
                                         sim=sim_index, kind="duopoly", members=(j, k)))
    stream = root.child("oligopoly")
    strats = _build(specs, tuple(range(m)), stream, config.step_budget)
    oligopoly = run_competition(strats, params, config.periods,
                                stream.child("demand").generator,
                                sim=sim_index, kind="oligopoly", members=tuple(range(m)))
    result = SimulationResult(sim_index, params, duopolies, oligopoly,
                              tuple(s.name for s in specs))
    result.scorecard = score_result(result)
    return result


def score_result(result: SimulationResult) -> Scorecard:
    m = len(result.oligopoly.members)
    y = np.zeros((m, m))
    for tr in result.duopolies:
        j, k = tr.members
        rev = tr.revenue
        y[j, k] = rev[0]
        y[k, j] = rev[1]
    x = np.zeros(m)
    x[list(result.oligopoly.members)] = result.oligopoly.revenue
    return score_simulation(y, x)


@dataclass
class TournamentResult:
    scorecards: list[Scorecard]
    roster: tuple[str, ...]
    failures: int = 0
    results: list[SimulationResult] = field(default_factory=list)

    @property
    def final(self) -> np.ndarray:
        return np.mean([s.final for s in self.scorecards], axis=0)


def _simulate_one(args):
    specs, sim, config, sink, keep = args
    res = run_simulation(specs, sim, config)
    if sink is not None:
        sink(res)
    failures = sum(tr.failures for tr in res.traces)
    return sim, res.scorecard, failures, (res if keep else None)


def run_tournament(specs: Sequence[StrategySpec], sims: int, config: EngineConfig,
                   sink: Callable[[SimulationResult], None] | None = None,
                   parallel: int = 1, keep_results: bool = False,
                   sim_indices: Sequence[int] | None = None) -> TournamentResult:
    """Run ``sims`` simulations; results do not depend on ``parallel``.

    ``sink`` is called once per simulation, inside the worker that ran it.
    """
    if sims < 1:
        raise ValueError("need at least one simulation")
    indices = list(sim_indices) if sim_indices is not None else list(range(sims))
    jobs = [(tuple(specs), i, config, sink, keep_results) for i in indices]
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            out = list(pool.map(_simulate_one, jobs, chunksize=1))
    else:
        out = [_simulate_one(job) for job in jobs]
    out.sort(key=lambda r: r[0])
    return TournamentResult(
        [r[1] for r in out], tuple(s.name for s in specs), sum(r[2] for r in out),
        [r[3] for r in out] if keep_results else [])
