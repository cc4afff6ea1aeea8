"""The eight contest algorithms behind a common :class:`Strategy` interface."""

from __future__ import annotations

from .bandits import BanditBucket, BanditGrid
from .base import Observation, StepBudget, StepBudgetExceeded, Strategy, empty_observation
from .bmodel import BanditModel
from .greedy import Greedy
from .logit import Logit
from .ml import Ml
from .ols import Ols
from .params import apply_overrides
from .wls import Wls

REGISTRY: dict[str, type[Strategy]] = {
    cls.name: cls
    for cls in (Logit, Ols, BanditBucket, BanditGrid, BanditModel, Ml, Greedy, Wls)
}

CONTEST_ROSTER = ("logit", "ols", "b-bucket", "b-grid", "b-model", "ml", "greedy", "wls")


def resolve_params(name: str, overrides: dict | None = None):
    if name not in REGISTRY:
        raise KeyError(f"unknown strategy {name!r}; known: {', '.join(sorted(REGISTRY))}")
    params = REGISTRY[name].default_params()
    if overrides:
        params = apply_overrides(params, overrides)
    return params


__all__ = [
    "REGISTRY", "CONTEST_ROSTER", "Observation", "StepBudget", "StepBudgetExceeded",
    "Strategy", "empty_observation", "resolve_params",
]
