"""Aggregate tables from simulation traces.

Every table is rebuilt from the trace summaries alone; the revenue-share
scores are recomputed here independently of the engine's scorer.
"""

from __future__ import annotations

import csv
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .traces import SimulationRecord, TraceError, load_simulations

log = logging.getLogger(__name__)

SEGMENT_NAMES = ("shoppers", "loyals", "scientists")
THETA_KEYS = ("theta_sho", "theta_loy", "theta_sci")
THETA_WIDTH = 0.1


class ReportError(ValueError):
    pass


@dataclass
class Table:
    name: str
    columns: list[str]
    rows: list[list]

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def where(self, **match) -> list[dict]:
        out = []
        for r in self.rows:
            d = dict(zip(self.columns, r))
            if all(d[k] == v for k, v in match.items()):
                out.append(d)
        return out


@dataclass
class ReportBundle:
    labels: tuple[str, ...]
    sims: list[int]
    tables: dict[str, Table] = field(default_factory=dict)
    skipped: list[str] = field(default_factory=list)
    per_sim_final: np.ndarray | None = None  # (S, m)

    def __getitem__(self, name: str) -> Table:
        return self.tables[name]

    def add(self, table: Table) -> None:
        self.tables[table.name] = table


def competitor_labels(roster) -> tuple[str, ...]:
    """Roster names, suffixed with the slot when a name repeats."""
    counts = Counter(roster)
    return tuple(name if counts[name] == 1 else f"{name}#{slot}"
                 for slot, name in enumerate(roster))


# ---------------------------------------------------------------------------
# Revenue shares
# ---------------------------------------------------------------------------

def _normalize(v: np.ndarray, label: str, sim: int) -> np.ndarray:
    total = float(v.sum())
    if total > 0:
        return v / total
    log.warning("simulation %d: zero total %s revenue; equal shares", sim, label)
    return np.full(v.shape[0], 1.0 / v.shape[0])


def revenue_matrices(rec: SimulationRecord) -> tuple[np.ndarray, np.ndarray]:
    """``x`` (oligopoly revenue per slot) and ``y[j, k]`` (duopoly revenue of j vs k)."""
    m = len(rec.roster)
    olig = rec.oligopoly
    x = np.zeros(m)
    for pos, slot in enumerate(olig.members):
        x[slot] = olig.summary["revenue"][pos]
    y = np.zeros((m, m))
    for c in rec.duopolies:
        j, k = c.members
        y[j, k] = c.summary["revenue"][0]
        y[k, j] = c.summary["revenue"][1]
    return x, y


def simulation_shares(rec: SimulationRecord) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x, y = revenue_matrices(rec)
    x_bar = _normalize(x, "oligopoly", rec.sim)
    y_bar = _normalize(y.sum(axis=1), "duopoly", rec.sim)
    return x_bar, y_bar, 0.5 * (x_bar + y_bar)


# ---------------------------------------------------------------------------
# Individual tables
# ---------------------------------------------------------------------------

def _ranks(values: np.ndarray) -> list[int]:
    order = sorted(range(len(values)), key=lambda i: (-values[i], i))
    ranks = [0] * len(values)
    for r, i in enumerate(order, 1):
        ranks[i] = r
    return ranks


def _scores(labels, shares) -> tuple[Table, Table, np.ndarray]:
    xs = np.array([s[1][0] for s in shares])
    ys = np.array([s[1][1] for s in shares])
    fs = np.array([s[1][2] for s in shares])
    mean_f = fs.mean(axis=0)
    ranks = _ranks(mean_f)
    rows = []
    for j, label in enumerate(labels):
        rows.append([ranks[j], label, float(xs[:, j].mean()), float(ys[:, j].mean()),
                     float(mean_f[j]), float(fs[:, j].std()), len(shares)])
    scores = Table("scores", ["rank", "strategy", "x_bar", "y_bar", "final", "final_std", "sims"],
                   rows)
    share_rows = []
    for (sim, (xb, yb, fb)) in shares:
        for j, label in enumerate(labels):
            share_rows.append([sim, label, float(xb[j]), float(yb[j]), float(fb[j])])
    return scores, Table("shares", ["sim", "strategy", "x_bar", "y_bar", "final"],
                         share_rows), fs


def _duopoly_revenue(labels, records) -> Table:
    m = len(labels)
    total = np.zeros((m, m))
    for rec in records:
        for c in rec.duopolies:
            j, k = c.members
            per = c.summary["periods"]
            total[j, k] += c.summary["revenue"][0] / per
            total[k, j] += c.summary["revenue"][1] / per
    mean = total / len(records)
    off = ~np.eye(m, dtype=bool)
    rows = []
    for j, label in enumerate(labels):
        cells = ["" if j == k else float(mean[j, k]) for k in range(m)]
        rows.append([label] + cells + [float(mean[j][off[j]].mean()) if m > 1 else ""])
    col_avg = [float(mean[:, k][off[:, k]].mean()) for k in range(m)]
    rows.append(["average"] + col_avg + [""])
    return Table("duopoly_revenue", ["strategy"] + list(labels) + ["average"], rows)


def _extremes(labels, records) -> Table:
    m = len(labels)
    keys = [(q, e) for q in ("price", "sales", "revenue") for e in ("low", "high")]
    counts = {k: np.zeros(m) for k in keys}
    strict = np.zeros(m)
    periods = 0
    for rec in records:
        olig = rec.oligopoly
        slots = list(olig.members)
        ext = olig.summary["extremes"]
        for q, e in keys:
            counts[(q, e)][slots] += ext[q][e]
        strict[slots] += ext["price"]["strict_high"]
        periods += olig.summary["periods"]
    rows = []
    for j, label in enumerate(labels):
        rows.append([label] + [float(counts[k][j] / periods) for k in keys]
                    + [float(strict[j] / periods)])
    return Table("extremes", ["strategy"] + [f"{q}_{e}" for q, e in keys] + ["price_high_strict"],
                 rows)


class _PricePool:
    """Running price moments plus the price values used for quartiles."""

    def __init__(self):
        self.n = 0
        self.s = 0.0
        self.ss = 0.0
        self.values: list[np.ndarray] = []

    def add(self, n, s, ss, values) -> None:
        self.n += n
        self.s += s
        self.ss += ss
        self.values.append(np.asarray(values, dtype=float))

    def row(self) -> list:
        if self.n == 0:
            return [0, "", "", "", "", ""]
        mean = self.s / self.n
        var = max(self.ss / self.n - mean * mean, 0.0)
        cv = float(np.sqrt(var) / mean) if mean > 0 else ""
        q1, med, q3 = np.quantile(np.concatenate(self.values), [0.25, 0.5, 0.75])
        return [self.n, float(mean), float(q1), float(med), float(q3), cv]


def _competition_prices(c, pos) -> np.ndarray:
    """Quartile inputs: every period when available, else the stored sample."""
    if c.periods:
        return np.array([r["prices"][pos] for r in c.periods], dtype=float)
    return np.array([row[pos] for row in c.summary["price_sample"]], dtype=float)


def _prices(labels, records) -> tuple[Table, Table]:
    m = len(labels)
    pools: dict[tuple[int, str], _PricePool] = {}

    def pool(j, scope):
        return pools.setdefault((j, scope), _PricePool())

    for rec in records:
        for c in rec.competitions:
            for pos, slot in enumerate(c.members):
                args = (c.summary["periods"], c.summary["price_sum"][pos],
                        c.summary["price_sumsq"][pos], _competition_prices(c, pos))
                pool(slot, "all").add(*args)
                if c.kind == "oligopoly":
                    pool(slot, "oligopoly").add(*args)
                else:
                    other = c.members[1 - pos]
                    pool(slot, f"vs:{labels[other]}").add(*args)
    rows = []
    cv = np.full((m, m), np.nan)
    for j, label in enumerate(labels):
        scopes = ["all", "oligopoly"] + [f"vs:{labels[k]}" for k in range(m) if k != j]
        for scope in scopes:
            if (j, scope) in pools:
                r = pools[(j, scope)].row()
                rows.append([label, scope] + r)
                if scope.startswith("vs:") and r[-1] != "":
                    cv[j, labels.index(scope[3:])] = r[-1]
    table = Table("prices", ["strategy", "scope", "periods", "mean", "q1", "median", "q3", "cv"],
                  rows)
    heat = [[label] + ["" if not np.isfinite(v) else float(v) for v in cv[j]]
            for j, label in enumerate(labels)]
    return table, Table("price_cv", ["strategy"] + list(labels), heat)


def _segments(labels, records) -> Table:
    m = len(labels)
    acc = {scope: {"sales": np.zeros((m, 3)), "revenue": np.zeros((m, 3)),
                   "periods": np.zeros(m), "expected": np.zeros((m, 3))}
           for scope in ("oligopoly", "duopoly")}
    for rec in records:
        lam = rec.market["lam"]
        theta = np.array([rec.market[k] for k in THETA_KEYS])
        for c in rec.competitions:
            a = acc[c.kind]
            per = c.summary["periods"]
            for pos, slot in enumerate(c.members):
                a["sales"][slot] += c.summary["segment_sales"][pos]
                a["revenue"][slot] += c.summary["segment_revenue"][pos]
                a["periods"][slot] += per
                a["expected"][slot] += lam * theta * per
    rows = []
    for scope, a in acc.items():
        for j, label in enumerate(labels):
            if a["periods"][j] == 0:
                continue
            for s, seg in enumerate(SEGMENT_NAMES):
                exp = a["expected"][j, s]
                rows.append([label, scope, seg, float(a["sales"][j, s] / a["periods"][j]),
                             float(a["revenue"][j, s] / a["periods"][j]),
                             float(a["revenue"][j, s] / exp) if exp > 0 else ""])
    return Table("segments", ["strategy", "scope", "segment", "sales_per_period",
                              "revenue_per_period", "revenue_per_arrival"], rows)


def theta_bucket(theta: float, width: float = THETA_WIDTH) -> int:
    """Bucket ``[k*width, (k+1)*width)``; the top bucket also takes ``theta == 1``."""
    nb = int(round(1.0 / width))
    # the nudge keeps edges such as 0.3 / 0.1 = 2.999... in the upper bucket
    return min(int(theta / width + 1e-9), nb - 1)


def _theta_buckets(labels, records) -> Table:
    m = len(labels)
    nb = int(round(1.0 / THETA_WIDTH))
    shape = (3, nb, m)
    rev = np.zeros(shape)
    price = np.zeros(shape)
    duo = np.zeros(shape)
    count = np.zeros((3, nb))
    for rec in records:
        olig = rec.oligopoly
        per = olig.summary["periods"]
        x = np.zeros(m)
        p = np.zeros(m)
        for pos, slot in enumerate(olig.members):
            x[slot] = olig.summary["revenue"][pos] / per
            p[slot] = olig.summary["price_sum"][pos] / per
        d = np.zeros(m)
        n_duo = np.zeros(m)
        for c in rec.duopolies:
            for pos, slot in enumerate(c.members):
                d[slot] += c.summary["revenue"][pos] / c.summary["periods"]
                n_duo[slot] += 1
        d = np.divide(d, n_duo, out=np.zeros(m), where=n_duo > 0)
        for s, key in enumerate(THETA_KEYS):
            b = theta_bucket(rec.market[key])
            rev[s, b] += x
            price[s, b] += p
            duo[s, b] += d
            count[s, b] += 1
    rows = []
    for s, seg in enumerate(SEGMENT_NAMES):
        for b in range(nb):
            n = count[s, b]
            lo, hi = round(b * THETA_WIDTH, 10), round((b + 1) * THETA_WIDTH, 10)
            for j, label in enumerate(labels + ("all",)):
                if n == 0:
                    rows.append([seg, b, lo, hi, label, 0, "", "", ""])
                    continue
                if label == "all":
                    vals = (rev[s, b].mean() / n, price[s, b].mean() / n, duo[s, b].mean() / n)
                else:
                    vals = (rev[s, b, j] / n, price[s, b, j] / n, duo[s, b, j] / n)
                rows.append([seg, b, lo, hi, label, int(n)] + [float(v) for v in vals])
    return Table("theta_buckets", ["segment", "bucket", "theta_lo", "theta_hi", "strategy", "sims",
                                   "oligopoly_revenue_per_period", "oligopoly_mean_price",
                                   "duopoly_revenue_per_period"], rows)


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------

def build_report(records: list[SimulationRecord], first_k: int | None = None) -> ReportBundle:
    """Every table from complete simulation records.

    ``first_k`` restricts the per-simulation ``shares`` table (the boxplot
    data) to the lowest ``first_k`` simulation indices; aggregates always use
    every simulation.
    """
    if not records:
        raise ReportError("no complete simulation traces to report on")
    records = sorted(records, key=lambda r: r.sim)
    roster = records[0].roster
    for rec in records:
        if rec.roster != roster:
            raise ReportError(f"simulation {rec.sim} has roster {rec.roster}, expected {roster}")
    labels = competitor_labels(roster)
    shares = [(rec.sim, simulation_shares(rec)) for rec in records]
    bundle = ReportBundle(labels, [r.sim for r in records])
    scores, share_table, finals = _scores(labels, shares)
    bundle.per_sim_final = finals
    if first_k is not None:
        keep = {r.sim for r in records[:first_k]}
        share_table.rows = [r for r in share_table.rows if r[0] in keep]
    bundle.add(scores)
    bundle.add(share_table)
    bundle.add(_duopoly_revenue(labels, records))
    bundle.add(_extremes(labels, records))
    prices, heat = _prices(labels, records)
    bundle.add(prices)
    bundle.add(heat)
    bundle.add(_segments(labels, records))
    bundle.add(_theta_buckets(labels, records))
    return bundle


def write_report(bundle: ReportBundle, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, table in bundle.tables.items():
        path = out_dir / f"{name}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(table.columns)
            w.writerows(table.rows)
        paths.append(path)
    return paths


def report_from_dir(trace_dir, out_dir=None, first_k: int | None = None) -> ReportBundle:
    """Load every complete trace in ``trace_dir``; optionally write the CSV tables."""
    if not Path(trace_dir).is_dir():
        raise ReportError(f"trace directory {trace_dir} does not exist")
    records, skipped = load_simulations(trace_dir)
    if skipped:
        log.warning("excluded %d incomplete trace file(s)", len(skipped))
    try:
        bundle = build_report(records, first_k)
    except TraceError as exc:
        raise ReportError(str(exc)) from None
    bundle.skipped = [p.name for p in skipped]
    if out_dir is not None:
        write_report(bundle, out_dir)
    return bundle
