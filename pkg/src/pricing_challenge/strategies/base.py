from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class StepBudgetExceeded(RuntimeError):
    """A strategy used more computation steps than one call allows."""


class StepBudget:
    """Deterministic per-call work allowance, charged cooperatively by learners."""

    __slots__ = ("limit", "used")

    def __init__(self, limit: int | None = None):
        self.limit = limit
        self.used = 0

    def reset(self) -> None:
        self.used = 0

    def spend(self, steps: int = 1) -> None:
        self.used += steps
        if self.limit is not None and self.used > self.limit:
            raise StepBudgetExceeded(f"step budget of {self.limit} exceeded")


@dataclass(slots=True)
class Observation:
    """What a competitor sees after ``t`` completed periods.

    ``prices`` holds every competitor's posted price for periods ``1..t``
    (row ``i`` is period ``i+1``); ``own_sales`` holds only this competitor's
    sales.  Both arrays are read-only views.
    """

    t: int
    own_index: int
    n: int
    prices: np.ndarray
    own_sales: np.ndarray

    @property
    def period(self) -> int:
        """The period the next price applies to."""
        return self.t + 1

    @property
    def own_prices(self) -> np.ndarray:
        return self.prices[:, self.own_index]

    @property
    def competitor_prices(self) -> np.ndarray:
        """``(t, n-1)`` prices of the other competitors, in index order."""
        return np.delete(self.prices, self.own_index, axis=1)


def empty_observation(own_index: int, n: int) -> Observation:
    prices = np.zeros((0, n))
    sales = np.zeros(0, dtype=np.int64)
    prices.flags.writeable = False
    sales.flags.writeable = False
    return Observation(0, own_index, n, prices, sales)


class Strategy:
    """Base class for pricing agents.

    A fresh instance is built for every competition.  ``next_price`` receives
    the history through period ``t`` and returns the price for ``t+1``.
    """

    name = "base"

    def __init__(self, rng: np.random.Generator, n: int, own_index: int,
                 params=None, budget: StepBudget | None = None):
        self.rng = rng
        self.n = n
        self.own_index = own_index
        self.params = params if params is not None else self.default_params()
        self.budget = budget if budget is not None else StepBudget()

    @classmethod
    def default_params(cls):
        return None

    def spend(self, steps: int = 1) -> None:
        self.budget.spend(steps)

    def next_price(self, obs: Observation) -> float:
        raise NotImplementedError
