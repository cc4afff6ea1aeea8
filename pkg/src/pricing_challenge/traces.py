"""Line-delimited JSON traces: one file per simulation, plus a run manifest.

A simulation file holds, in order::

    {"record": "header", ...}             market parameters and roster
    {"record": "competition", ...}        start of one competition
    {"record": "period", ...}             one per period (full level only)
    {"record": "summary", ...}            per-competition aggregates
    ...                                   (29 competition blocks for m = 8)
    {"record": "end", ...}                completeness marker

Summaries carry everything the report needs, so revenue-only traces still
support every table.  Floats are written with ``repr`` precision, so reading
a trace back reproduces the engine's numbers exactly.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .engine import CompetitionTrace, SimulationResult

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
PARTIAL_MARKER = "PARTIAL"
MANIFEST = "manifest.json"
PRICE_SAMPLE_POINTS = 100


class TraceError(ValueError):
    """A trace file is truncated or malformed."""


def sim_filename(sim: int) -> str:
    return f"sim-{sim:06d}.jsonl"


def _dump(record: dict) -> str:
    return json.dumps(record, separators=(",", ":"), allow_nan=False)


def extreme_counts(values: np.ndarray) -> dict:
    """Per-column counts of periods at the row minimum / maximum (ties count for all)."""
    lo = values == values.min(axis=1, keepdims=True)
    hi = values == values.max(axis=1, keepdims=True)
    strict_hi = hi & (hi.sum(axis=1, keepdims=True) == 1)
    return {"low": lo.sum(axis=0).tolist(), "high": hi.sum(axis=0).tolist(),
            "strict_high": strict_hi.sum(axis=0).tolist()}


def competition_summary(trace: CompetitionTrace) -> dict:
    prices = trace.prices
    sales = trace.sales
    seg_revenue = prices[:, :, None] * sales  # (T, n, 3)
    revenue = trace.revenue_per_period()
    stride = max(1, math.ceil(trace.periods / PRICE_SAMPLE_POINTS))
    return {
        "record": "summary",
        "comp": trace.comp_id,
        "periods": trace.periods,
        "revenue": revenue.sum(axis=0).tolist(),
        "segment_sales": sales.sum(axis=0).tolist(),
        "segment_revenue": seg_revenue.sum(axis=0).tolist(),
        "arrivals": trace.arrivals.sum(axis=0).tolist(),
        "price_sum": prices.sum(axis=0).tolist(),
        "price_sumsq": (prices * prices).sum(axis=0).tolist(),
        "price_sample_stride": stride,
        "price_sample": prices[::stride].tolist(),
        "revenue_sample": revenue[::stride].tolist(),
        "extremes": {
            "price": extreme_counts(prices),
            "sales": extreme_counts(sales.sum(axis=2)),
            "revenue": extreme_counts(revenue),
        },
        "failures": trace.failures,
    }


def simulation_lines(result: SimulationResult, level: str = "revenue", seed: int | None = None):
    """Yield the text lines (without newline) of one simulation's trace."""
    yield _dump({
        "record": "header", "format": FORMAT_VERSION, "sim": result.sim, "seed": seed,
        "roster": list(result.roster), "level": level,
        "periods": result.oligopoly.periods, "market": result.params.to_dict(),
        "competitions": len(result.traces),
    })
    for tr in result.traces:
        yield _dump({"record": "competition", "comp": tr.comp_id, "kind": tr.kind,
                     "members": list(tr.members)})
        if level == "full":
            rev = tr.revenue_per_period()
            for t in range(tr.periods):
                yield _dump({"record": "period", "comp": tr.comp_id, "t": t + 1,
                             "prices": tr.prices[t].tolist(),
                             "sales": tr.sales[t].tolist(),
                             "arrivals": tr.arrivals[t].tolist(),
                             "revenue": rev[t].tolist()})
        yield _dump(competition_summary(tr))
    yield _dump({"record": "end", "sim": result.sim, "competitions": len(result.traces)})


def write_simulation(result: SimulationResult, out_dir, level: str = "revenue",
                     seed: int | None = None) -> Path:
    """Write one simulation file atomically (temp file, then rename)."""
    out_dir = Path(out_dir)
    path = out_dir / sim_filename(result.sim)
    tmp = path.with_suffix(".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        for line in simulation_lines(result, level, seed):
            fh.write(line)
            fh.write("\n")
    os.replace(tmp, path)
    return path


@dataclass
class TraceWriter:
    """Picklable simulation sink used by tournament workers."""

    out_dir: str
    level: str = "revenue"
    seed: int | None = None

    def __call__(self, result: SimulationResult) -> None:
        write_simulation(result, self.out_dir, self.level, self.seed)


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(out_dir, config_fields: dict, config_hash: str, sims,
                   trace_dir: str = "traces") -> Path:
    """Manifest with the config, its hash and a digest of every simulation file."""
    out_dir = Path(out_dir)
    files = {}
    for sim in sims:
        name = f"{trace_dir}/{sim_filename(sim)}"
        files[name] = file_digest(out_dir / name)
    manifest = {"format": FORMAT_VERSION, "config_hash": config_hash,
                "seed": config_fields.get("seed"), "config": config_fields, "files": files}
    path = out_dir / MANIFEST
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def mark_partial(out_dir, message: str) -> None:
    Path(out_dir, PARTIAL_MARKER).write_text(message.rstrip() + "\n")


def clear_partial(out_dir) -> None:
    try:
        Path(out_dir, PARTIAL_MARKER).unlink()
    except FileNotFoundError:
        pass


# ---------------------------------------------------------------------------
# Reading
# ---------------------------------------------------------------------------

@dataclass
class CompetitionRecord:
    comp: str
    kind: str
    members: tuple[int, ...]
    summary: dict
    periods: list[dict]  # empty at revenue level

    def series(self) -> dict[str, np.ndarray]:
        """Per-period arrays from full-level records."""
        if not self.periods:
            raise TraceError(f"{self.comp}: no per-period records (trace level is revenue-only)")
        return {
            "t": np.array([r["t"] for r in self.periods]),
            "prices": np.array([r["prices"] for r in self.periods], dtype=float),
            "sales": np.array([r["sales"] for r in self.periods], dtype=np.int64),
            "arrivals": np.array([r["arrivals"] for r in self.periods], dtype=np.int64),
            "revenue": np.array([r["revenue"] for r in self.periods], dtype=float),
        }

    def sampled_series(self) -> dict[str, np.ndarray]:
        """Every ``price_sample_stride``-th period from the summary (any trace level)."""
        s = self.summary
        stride = s["price_sample_stride"]
        prices = np.array(s["price_sample"], dtype=float)
        return {
            "t": 1 + stride * np.arange(prices.shape[0]),
            "prices": prices,
            "revenue": np.array(s["revenue_sample"], dtype=float),
        }


@dataclass
class SimulationRecord:
    sim: int
    header: dict
    competitions: list[CompetitionRecord]

    @property
    def roster(self) -> tuple[str, ...]:
        return tuple(self.header["roster"])

    @property
    def market(self) -> dict:
        return self.header["market"]

    @property
    def oligopoly(self) -> CompetitionRecord:
        for c in self.competitions:
            if c.kind == "oligopoly":
                return c
        raise TraceError(f"simulation {self.sim}: no oligopoly")

    @property
    def duopolies(self) -> list[CompetitionRecord]:
        return [c for c in self.competitions if c.kind == "duopoly"]


def read_simulation(path) -> SimulationRecord:
    """Parse one simulation file; raises :class:`TraceError` unless it is complete."""
    header = None
    comps: list[CompetitionRecord] = []
    current: CompetitionRecord | None = None
    ended = False
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            try:
                rec = json.loads(line)
            except json.JSONDecodeError:
                raise TraceError(f"{path}:{lineno}: malformed record") from None
            kind = rec.get("record")
            if ended:
                raise TraceError(f"{path}:{lineno}: data after end marker")
            if header is None:
                if kind != "header":
                    raise TraceError(f"{path}: missing header")
                header = rec
            elif kind == "competition":
                if current is not None:
                    raise TraceError(f"{path}:{lineno}: competition {current.comp} has no summary")
                current = CompetitionRecord(rec["comp"], rec["kind"], tuple(rec["members"]),
                                            {}, [])
            elif kind == "period":
                if current is None or rec["comp"] != current.comp:
                    raise TraceError(f"{path}:{lineno}: period record outside its competition")
                current.periods.append(rec)
            elif kind == "summary":
                if current is None or rec["comp"] != current.comp:
                    raise TraceError(f"{path}:{lineno}: summary outside its competition")
                current.summary = rec
                comps.append(current)
                current = None
            elif kind == "end":
                ended = True
            else:
                raise TraceError(f"{path}:{lineno}: unknown record type {kind!r}")
    if header is None:
        raise TraceError(f"{path}: empty file")
    if not ended or current is not None:
        raise TraceError(f"{path}: truncated (no end marker)")
    if len(comps) != header.get("competitions", len(comps)):
        raise TraceError(f"{path}: expected {header['competitions']} competitions, "
                         f"found {len(comps)}")
    return SimulationRecord(int(header["sim"]), header, comps)


def trace_files(out_dir) -> list[Path]:
    return sorted(Path(out_dir).glob("sim-*.jsonl"))


def load_simulations(out_dir) -> tuple[list[SimulationRecord], list[Path]]:
    """All complete simulations in ``out_dir`` and the paths that were skipped."""
    good, skipped = [], []
    for path in trace_files(out_dir):
        try:
            good.append(read_simulation(path))
        except (TraceError, KeyError, TypeError) as exc:
            log.warning("skipping %s: %s", path.name, exc)
            skipped.append(path)
    return good, skipped
