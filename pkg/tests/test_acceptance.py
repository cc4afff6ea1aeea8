"""Acceptance criteria 1-9.

Each test prints one PASS/FAIL line (collected again at the end of the run by
conftest).  The desk-scale and full-scale runs are marked ``slow``.
"""

import math
import os
import time

import numpy as np
import pytest
from scipy import stats

from pricing_challenge import cli
from pricing_challenge.engine import (EngineConfig, StrategySpec, run_competition,
                                      run_tournament)
from pricing_challenge.market import (MarketParams, logit_slope, realize_period,
                                      sample_market_params)
from pricing_challenge.report import report_from_dir
from pricing_challenge.stochastic import RngStream, lambert_w
from pricing_challenge.strategies import CONTEST_ROSTER, StepBudget
from pricing_challenge.strategies import greedy as greedy_mod
from pricing_challenge.strategies.bmodel import ChoiceModel, anneal_model, purchase_share
from pricing_challenge.strategies.greedy import Greedy
from pricing_challenge.strategies.logit import _own_logit, fit_mixture_logit
from pricing_challenge.strategies.ml import optimize_price, select_regressor
from pricing_challenge.strategies.ols import fit_demand_models, revenue_line_search, select_model
from pricing_challenge.strategies.wls import wls_fit
from pricing_challenge.traces import TraceWriter, load_simulations

CHEAP = ("greedy", "b-grid", "b-bucket", "ols")


def specs_for(names):
    return [StrategySpec.from_name(n) for n in names]


def max_parallel():
    return max(2, os.cpu_count() or 1)


def dir_bytes(path):
    return {p.name: p.read_bytes() for p in sorted(path.glob("sim-*.jsonl"))}


# -- 1 ---------------------------------------------------------------------------

def test_criterion_1_score_normalization(verdict):
    start = time.perf_counter()
    t = run_tournament(specs_for(CHEAP), 200, EngineConfig(seed=1, periods=100))
    elapsed = time.perf_counter() - start
    worst = max(abs(float(getattr(s, k).sum()) - 1.0)
                for s in t.scorecards for k in ("x_bar", "y_bar", "final"))
    ok = len(t.scorecards) == 200 and worst <= 1e-12 and elapsed < 60
    verdict(1, ok, f"200 sims x 100 periods, max |sum - 1| = {worst:.1e}, {elapsed:.1f} s")
    assert ok


# -- 2 ---------------------------------------------------------------------------

def _grid_peak(alpha, beta_n, n, target, step=0.01):
    grid = np.arange(1, int(round(3 * target / step)) + 1) * step
    u = np.exp(alpha - beta_n * grid)
    return grid[np.argmax(n * grid * u / (1 + n * u))]


def test_criterion_2_calibration_oracle(verdict):
    root = RngStream(2024)
    worst = 0.0
    for i in range(100):
        p = sample_market_params(8, root.child(i).generator)
        for n in (2, 8):
            # slope rebuilt here from its definition, not read back from the market
            for alpha, target in ((p.alpha_phd, p.p_phd), (p.alpha_prof, p.p_prof)):
                beta = (lambert_w(n * math.exp(alpha - 1.0)) + 1.0) / target
                assert beta == pytest.approx(logit_slope(alpha, target, n), rel=1e-14)
                worst = max(worst, abs(_grid_peak(alpha, beta, n, target) - target))
    ok = worst <= 0.01 + 1e-9
    verdict(2, ok, f"100 markets x n in {{2, 8}}, max |peak - target| = {worst:.4f}")
    assert ok


# -- 3 ---------------------------------------------------------------------------

def closed_form_sales(prices, p: MarketParams, n):
    """Per-period expectations (shopper, loyal, scientist) written from scratch."""
    prices = np.asarray(prices, dtype=float)
    lowest = prices == prices.min()
    out = np.zeros((n, 3))
    out[lowest, 0] = p.lam * p.theta_sho * math.exp(-prices.min() / p.beta_sho) / lowest.sum()
    out[:, 1] = p.lam * p.theta_loy * (1.0 / n) * np.exp(-prices / p.beta_loy)
    for gamma, alpha, target in ((p.gamma_phd, p.alpha_phd, p.p_phd),
                                 (p.gamma_prof, p.alpha_prof, p.p_prof)):
        beta = (lambert_w(n * math.exp(alpha - 1.0)) + 1.0) / target
        w = np.exp(alpha - beta * prices)
        out[:, 2] += p.lam * p.theta_sci * gamma * w / (1.0 + w.sum())
    return out


def test_criterion_3_demand_closed_form(verdict):
    periods = int(os.environ.get("PRICING_DEMAND_PERIODS", 100_000))
    g = np.random.default_rng(33)
    root = RngStream(33)
    z_all = []
    exact_zero = True
    for c in range(20):
        n = int(g.choice([2, 3, 5, 8]))
        p = sample_market_params(n, root.child(c).generator)
        prices = np.round(g.uniform(0.5, 2.0, n) * p.p_phd, 2)
        if c % 4 == 0:
            prices[1] = prices[0]  # a tie at some price level
        mc = np.zeros((periods, n, 3))
        demand = root.child("demand", c).generator
        for t in range(periods):
            mc[t] = realize_period(prices, p, n, demand).sales
        want = closed_form_sales(prices, p, n)
        mean = mc.mean(axis=0)
        se = mc.std(axis=0, ddof=1) / math.sqrt(periods)
        live = want > 0
        exact_zero &= bool(np.all(mc[:, ~live] == 0))
        z_all.extend(((mean[live] - want[live]) / se[live]).tolist())
    z = np.abs(np.array(z_all))
    cells = z.size
    # about 150 cells: at 3 SE each a clean sampler misses a few by chance,
    # so the count of misses is held to its own 99th percentile
    allowed = int(stats.binom.ppf(0.99, cells, 2 * stats.norm.sf(3.0)))
    over = int((z > 3).sum())
    ok = exact_zero and over <= allowed and z.max() < 5
    verdict(3, ok, f"20 configs x {periods} periods, {cells} cells, {over} beyond 3 SE "
                   f"(allowed {allowed}), max |z| = {z.max():.2f}, "
                   f"structural zeros {'held' if exact_zero else 'violated'}")
    assert ok


# -- 4 ---------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_4_determinism_under_parallelism(verdict, tmp_path):
    specs = specs_for(CONTEST_ROSTER)
    cfg = EngineConfig(seed=44, periods=200)
    workers = max_parallel()
    digests = []
    for name, par in (("serial", 1), ("parallel", workers)):
        out = tmp_path / name
        out.mkdir()
        run_tournament(specs, 50, cfg, sink=TraceWriter(str(out), "revenue", 44), parallel=par)
        digests.append(dir_bytes(out))
    same = digests[0] == digests[1] and len(digests[0]) == 50
    verdict(4, same, f"50 sims x 200 periods, serial vs {workers} workers: "
                     f"{'byte-identical' if same else 'DIFFERENT'} trace files")
    assert same


# -- 5 ---------------------------------------------------------------------------

class Constant:
    def __init__(self, price):
        self.price = price
        self.budget = StepBudget()

    def next_price(self, obs):
        return self.price


def test_criterion_5_greedy_tit_for_tat(verdict, monkeypatch):
    triggers = []
    rule = greedy_mod.greedy_rule

    def counted(prev_min, q, floor=5.0):
        if prev_min < q:
            triggers.append((prev_min, q))
        return rule(prev_min, q, floor)

    monkeypatch.setattr(greedy_mod, "greedy_rule", counted)
    root = RngStream(55)
    matched = True
    for k in range(5):
        stream = root.child(k)
        params = sample_market_params(2, stream.child("market").generator)
        for pos in (0, 1):
            strats = [Constant(40.0), Constant(40.0)]
            strats[pos] = Greedy(stream.child("greedy", pos).generator, 2, pos)
            tr = run_competition(strats, params, 1000, stream.child("demand", pos).generator)
            matched &= bool(np.all(tr.prices[1:, pos] == 40.0))
    ok = matched and not triggers
    verdict(5, ok, f"10 runs x 1000 periods, periods 2..1000 at 40: {matched}, "
                   f"floor triggers: {len(triggers)}")
    assert ok


# -- 6 ---------------------------------------------------------------------------

def _ols_selection():
    p = np.linspace(1, 45, 60)
    lin = select_model(fit_demand_models(p, 100 - 2 * p))
    vertex = revenue_line_search(lin.predict, 0.1, 100.0)
    q = np.linspace(1, 80, 60)
    log = select_model(fit_demand_models(q, np.exp(5 - 0.1 * q)))
    return (lin.spec == "lin-lin" and abs(vertex - 25.0) <= 0.1
            and log.spec == "lin-log" and abs(log.slope + 0.1) <= 1e-9)


def _wls_recovery():
    g = np.random.default_rng(6)
    x, s = g.uniform(0, 50, 120), g.uniform(0, 150, 120)
    ok = True
    for scheme in ("uniform", "half-life-20", "half-life-100", "last-50"):
        fit = wls_fit(x, s, 50 - 2 * x + 0.5 * s, scheme)
        ok &= bool(np.allclose((fit.a, fit.b, fit.c), (50, -2, 0.5), atol=1e-6))
    return ok


def _em_slope():
    g = np.random.default_rng(0)
    p, y = g.uniform(5, 15, 500), g.uniform(5, 15, (500, 3))
    q, _, _ = _own_logit(np.array([10.0]), np.array([1.0]), p, y)
    sales = 60 * q[:, 0]
    model = fit_mixture_logit(p, y, sales, upper=int(np.ceil(sales.max())) * 5)
    top = int(np.argmax(model.group_weights()))
    return abs(model.b[top] - 1.0) <= 0.1


def _annealing_bounds():
    g = np.random.default_rng(7)
    true = ChoiceModel(3, scale=40.0, mu=60.0, sigma=20.0, d=1, e=2)
    own = g.uniform(5, 50, 500)
    profiles = np.sort(g.uniform(5, 50, (500, 3)), axis=1)
    sales = true.scale * purchase_share(true, own, profiles)
    fit, err = anneal_model(3, own, profiles, sales, np.random.default_rng(0))
    return (fit.d, fit.e) == (1, 2) and err < 0.01


def _ml_vertex():
    g = np.random.default_rng(3)
    own, comp = g.uniform(5, 35, 80), g.uniform(5, 35, (80, 2))
    _, est, _ = select_regressor(np.column_stack([own, comp]), 120 - 3 * own, 5, seed=0)
    return abs(optimize_price(est, comp.mean(axis=0)) - 20.0) <= 0.1


def test_criterion_6_learner_self_consistency(verdict):
    checks = {"ols": _ols_selection(), "wls": _wls_recovery(), "em": _em_slope(),
              "annealing": _annealing_bounds(), "ml": _ml_vertex()}
    ok = all(checks.values())
    verdict(6, ok, ", ".join(f"{k} {'ok' if v else 'FAILED'}" for k, v in checks.items()))
    assert ok


# -- 7 ---------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_7_directional_reproduction(verdict, tmp_path):
    start = time.perf_counter()
    run_tournament(specs_for(CONTEST_ROSTER), 500, EngineConfig(seed=7, periods=250),
                   sink=TraceWriter(str(tmp_path), "revenue", 7), parallel=os.cpu_count() or 1)
    elapsed = time.perf_counter() - start
    bundle = report_from_dir(tmp_path)
    assert len(bundle.sims) == 500

    rows = [r for r in bundle["theta_buckets"].where(segment="loyals", strategy="all") if r["sims"]]
    rho = stats.spearmanr([r["bucket"] for r in rows],
                          [r["oligopoly_revenue_per_period"] for r in rows]).statistic
    greedy_high = bundle["extremes"].where(strategy="greedy")[0]["price_high_strict"]
    scores = bundle["scores"]
    sd_x, sd_y = np.std(scores.column("x_bar")), np.std(scores.column("y_bar"))
    parts = {"a": rho > 0.8, "b": greedy_high <= 0.01, "c": sd_x > sd_y}
    cores = os.cpu_count() or 1
    ok = all(parts.values())
    verdict(7, ok, f"(a) Spearman {rho:.3f} over {len(rows)} loyal-share deciles; "
                   f"(b) greedy strictly highest in {greedy_high:.4f} of periods; "
                   f"(c) share std oligopoly {sd_x:.4f} vs duopoly {sd_y:.4f}; "
                   f"{elapsed / 60:.1f} min on {cores} core(s), "
                   f"about {elapsed * cores / 8 / 60:.1f} min scaled to 8 cores")
    assert ok


# -- 8 ---------------------------------------------------------------------------

def test_criterion_8_symmetry_control(verdict):
    t = run_tournament(specs_for(["b-bucket"] * 8), 200, EngineConfig(seed=8, periods=100))
    final = t.final
    dev = float(np.abs(final - 1 / 8).max())
    ok = dev <= 0.02
    verdict(8, ok, f"8 x b-bucket, 200 sims x 100 periods, slot means "
                   f"{np.round(final, 4).tolist()}, max |mean - 1/8| = {dev:.4f}")
    assert ok


# -- 9 ---------------------------------------------------------------------------

FULL_SIMS, FULL_PERIODS = 5000, 1000


@pytest.mark.slow
def test_criterion_9_full_scale_feasibility(verdict, tmp_path):
    """Runs the contest at full scale when PRICING_FULL_SCALE=1, otherwise a
    sample of simulations spread over the 5000 indices.

    The sample checks normalization and serial/parallel byte identity and
    measures the per-simulation cost; a sample alone cannot show that the full
    run completes, so without the full run the verdict is FAIL and the test
    is reported as an expected failure.
    """
    full = os.environ.get("PRICING_FULL_SCALE") == "1"
    cores = os.cpu_count() or 1
    if full:
        out = tmp_path / "full"
        start = time.perf_counter()
        code = cli.main(["run", "--sims", str(FULL_SIMS), "--periods", str(FULL_PERIODS),
                         "--seed", "9", "--parallel", str(cores), "--out", str(out)])
        elapsed = time.perf_counter() - start
        records, skipped = load_simulations(out / "traces")
        ok = code == 0 and len(records) == FULL_SIMS and not skipped
        verdict(9, ok, f"full run {FULL_SIMS} x {FULL_PERIODS}: exit {code}, "
                       f"{len(records)} traces, {elapsed / 3600:.2f} h on {cores} core(s)")
        assert ok
        return

    sample = int(os.environ.get("PRICING_FULL_SCALE_SAMPLE", 10))
    indices = np.linspace(0, FULL_SIMS - 1, sample).round().astype(int).tolist()
    specs = specs_for(CONTEST_ROSTER)
    cfg = EngineConfig(seed=9, periods=FULL_PERIODS)
    for name in ("s", "p"):
        (tmp_path / name).mkdir()
    start = time.perf_counter()
    serial = run_tournament(specs, sample, cfg, sink=TraceWriter(str(tmp_path / "s"), "revenue", 9),
                            sim_indices=indices)
    per_sim = (time.perf_counter() - start) / sample
    run_tournament(specs, sample, cfg, sink=TraceWriter(str(tmp_path / "p"), "revenue", 9),
                   sim_indices=indices, parallel=max_parallel())
    worst = max(abs(float(getattr(s, k).sum()) - 1.0)
                for s in serial.scorecards for k in ("x_bar", "y_bar", "final"))
    identical = dir_bytes(tmp_path / "s") == dir_bytes(tmp_path / "p")
    sample_ok = worst <= 1e-12 and identical and len(serial.scorecards) == sample
    hours = per_sim * FULL_SIMS / 3600
    verdict(9, False,
            f"full run NOT executed: projected {hours:.1f} h on {cores} core(s) "
            f"({per_sim:.1f} s per simulation, about {hours * cores / 8:.1f} h on 8 cores); "
            f"sample of {sample} sims at {FULL_PERIODS} periods: normalization "
            f"{worst:.1e}, serial/parallel {'identical' if identical else 'DIFFERENT'}; "
            f"set PRICING_FULL_SCALE=1 to run it")
    assert sample_ok
    pytest.xfail(f"full-scale run not executed (projected {hours:.1f} h on this machine)")
