"""Run configuration: defaults, JSON file loading and command-line overrides."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .engine import DEFAULT_STEP_BUDGET, EngineConfig, StrategySpec
from .strategies import CONTEST_ROSTER, REGISTRY, resolve_params

TRACE_LEVELS = ("full", "revenue")


class ConfigError(ValueError):
    """Base class for configuration problems; ``str()`` is the diagnostic."""


class UnknownKeyError(ConfigError):
    pass


class UnknownStrategyError(ConfigError):
    pass


class InvalidCountError(ConfigError):
    pass


class RosterSizeError(ConfigError):
    pass


class ConfigFileError(ConfigError):
    pass


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    sims: int = 5000
    periods: int = 1000
    roster: tuple[str, ...] = CONTEST_ROSTER
    overrides: dict = field(default_factory=dict)  # strategy name -> {param: value}
    out: str = "results"
    parallel: int = 1
    trace_level: str = "revenue"
    step_budget: int | None = DEFAULT_STEP_BUDGET

    def engine_config(self) -> EngineConfig:
        return EngineConfig(seed=self.seed, periods=self.periods, step_budget=self.step_budget)

    def specs(self) -> list[StrategySpec]:
        return [StrategySpec(name, resolve_params(name, self.overrides.get(name)))
                for name in self.roster]

    def result_fields(self) -> dict:
        """Everything that influences trace contents (not where or how fast)."""
        d = asdict(self)
        del d["out"], d["parallel"]
        d["roster"] = list(self.roster)
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.result_fields(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


CONFIG_KEYS = tuple(f for f in RunConfig.__dataclass_fields__)


def _as_count(key: str, value, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise InvalidCountError(f"{key} must be an integer, got {value!r}")
    try:
        number = int(value)
    except ValueError:
        raise InvalidCountError(f"{key} must be an integer, got {value!r}") from None
    if isinstance(value, float) and number != value:
        raise InvalidCountError(f"{key} must be an integer, got {value!r}")
    if number < minimum:
        raise InvalidCountError(f"{key} must be >= {minimum}, got {number}")
    return number


def _as_roster(value) -> tuple[str, ...]:
    if isinstance(value, str):
        value = [v for v in value.split(",") if v.strip()]
    roster = tuple(str(v).strip() for v in value)
    unknown = [r for r in roster if r not in REGISTRY]
    if unknown:
        raise UnknownStrategyError(
            f"unknown strategy {unknown[0]!r}; known: {', '.join(sorted(REGISTRY))}")
    if len(roster) < 2:
        raise RosterSizeError(f"roster needs at least 2 strategies, got {len(roster)}")
    return roster


def _as_overrides(value) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f"overrides must map strategy names to parameter tables, got {value!r}")
    out = {}
    for name, table in value.items():
        if name not in REGISTRY:
            raise UnknownStrategyError(
                f"overrides for unknown strategy {name!r}; known: {', '.join(sorted(REGISTRY))}")
        if not isinstance(table, dict):
            raise ConfigError(f"overrides for {name!r} must be a table, got {table!r}")
        try:
            resolve_params(name, table)
        except KeyError as exc:
            raise UnknownKeyError(f"overrides for {name!r}: {exc.args[0]}") from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"overrides for {name!r}: {exc}") from None
        out[name] = dict(sorted(table.items()))
    return dict(sorted(out.items()))


def resolve(raw: dict, base: RunConfig | None = None) -> RunConfig:
    """Validate ``raw`` key/value pairs and apply them on top of ``base``."""
    unknown = sorted(set(raw) - set(CONFIG_KEYS))
    if unknown:
        raise UnknownKeyError(f"unknown configuration key(s): {', '.join(unknown)}; "
                              f"allowed: {', '.join(CONFIG_KEYS)}")
    cfg = base or RunConfig()
    clean = {}
    for key, value in raw.items():
        if key == "seed":
            clean[key] = _as_count(key, value, minimum=0)
        elif key in ("sims", "periods", "parallel"):
            clean[key] = _as_count(key, value)
        elif key == "step_budget":
            clean[key] = None if value is None else _as_count(key, value)
        elif key == "roster":
            clean[key] = _as_roster(value)
        elif key == "overrides":
            clean[key] = _as_overrides(value)
        elif key == "trace_level":
            if value not in TRACE_LEVELS:
                raise ConfigError(f"trace_level must be one of {TRACE_LEVELS}, got {value!r}")
            clean[key] = value
        elif key == "out":
            clean[key] = str(value)
    return replace(cfg, **clean)


def load_config_file(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigFileError(f"cannot read config file {path}: {exc.strerror or exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigFileError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigFileError(f"config file {path} must hold a JSON object")
    return {k.replace("-", "_"): v for k, v in data.items()}


def parse_config(path=None, **flags) -> RunConfig:
    """Defaults, then the JSON file at ``path``, then non-None ``flags``."""
    cfg = RunConfig()
    if path is not None:
        cfg = resolve(load_config_file(path), cfg)
    given = {k: v for k, v in flags.items() if v is not None}
    return resolve(given, cfg) if given else cfg
