"""Seeded random search over named hyperparameter ranges."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Any, Callable, Mapping

import numpy as np


@dataclass(frozen=True)
class Param:
    low: float
    high: float
    integer: bool = False

    def draw(self, rng: np.random.Generator):
        if self.integer:
            return int(rng.integers(int(self.low), int(self.high) + 1))
        return float(rng.uniform(self.low, self.high))


Space = Mapping[str, Param]


@dataclass(frozen=True)
class Trial:
    index: int
    params: dict
    value: float


MAX_GRID = 100_000


def draw_candidates(space: Space, budget: int, seed: int) -> list[dict]:
    """`budget` parameter draws; the first m draws do not depend on `budget`.

    All-integer spaces small enough to enumerate are sampled without
    replacement (a seeded permutation of the grid), so a budget at least the
    grid size covers it exhaustively. Other spaces use independent draws.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, 0x5EA4C4]))
    names = sorted(space)
    if names and all(space[n].integer for n in names):
        axes = [range(int(space[n].low), int(space[n].high) + 1) for n in names]
        size = math.prod(len(a) for a in axes)
        if size <= MAX_GRID:
            grid = list(itertools.product(*axes))
            order = rng.permutation(size)[:budget]
            return [dict(zip(names, (int(v) for v in grid[i]))) for i in order]
    return [{name: space[name].draw(rng) for name in names} for _ in range(budget)]


def random_search(
    objective: Callable[[dict], float],
    space: Space,
    budget: int,
    seed: int = 0,
    initial: tuple[dict, ...] = (),
    maximize: bool = True,
    strategy: Callable[[Space, int, int], list[dict]] = draw_candidates,
    errors: tuple[type[BaseException], ...] = (),
) -> tuple[Trial | None, list[Trial]]:
    """Evaluate `initial` candidates then strategy draws until `budget` candidates in total.

    Candidates whose objective raises one of `errors` are recorded with a NaN
    value and skipped during selection. Ties keep the earliest candidate.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    candidates = list(initial)[:budget]
    candidates += strategy(space, budget - len(candidates), seed)
    trials = []
    best = None
    for i, params in enumerate(candidates):
        try:
            value = float(objective(params))
        except errors:
            value = math.nan
        trials.append(Trial(i, dict(params), value))
        if math.isnan(value):
            continue
        if best is None or (value > best.value if maximize else value < best.value):
            best = trials[-1]
    return best, trials


def cached(fn: Callable[[dict], Any]) -> Callable[[dict], Any]:
    """Memoize an objective over its (hashable) parameter values."""
    memo: dict = {}

    def wrapper(params: dict):
        key = tuple(sorted(params.items()))
        if key not in memo:
            memo[key] = fn(params)
        return memo[key]

    return wrapper
