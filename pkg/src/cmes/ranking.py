"""Average-rank comparison of optimizers with midranks and bootstrap intervals."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.stats import rankdata


def rank_cell(values: Mapping[str, Optional[float]]) -> dict:
    """Rank strategies in one (problem, iteration, seed) cell.

    Strategies with a value are ranked ascending (ties get the average of
    their positions); those without one share the midrank of the positions
    left over.
    """
    names = list(values)
    have = [s for s in names if values[s] is not None]
    missing = [s for s in names if values[s] is None]
    ranks = {}
    if have:
        r = rankdata([values[s] for s in have], method="average")
        ranks.update({s: float(v) for s, v in zip(have, r)})
    if missing:
        n, k = len(names), len(have)
        shared = (k + 1 + n) / 2.0
        ranks.update({s: shared for s in missing})
    return {s: ranks[s] for s in names}


@dataclass
class RankTable:
    strategies: list
    cells: dict                     # (problem, iteration, seed) -> {strategy: rank}
    mean_rank: dict
    per_iteration: dict             # strategy -> mean rank at each iteration (over problems, seeds)
    ci: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "strategies": self.strategies,
            "mean_rank": self.mean_rank,
            "ci95": {s: list(v) for s, v in self.ci.items()},
            "per_iteration": self.per_iteration,
            "n_cells": len(self.cells),
        }


def _check_coverage(results):
    for problem, by_strategy in results.items():
        if not by_strategy:
            raise ValueError(f"no strategies for problem {problem!r}")
        shapes = {s: (tuple(sorted(seeds)), {len(v) for v in seeds.values()})
                  for s, seeds in by_strategy.items()}
        ref = next(iter(shapes.values()))
        for s, shape in shapes.items():
            if shape != ref or len(shape[1]) != 1:
                raise ValueError(f"strategy {s!r} on {problem!r} does not cover the same seeds "
                                 "and iterations as the others")
    strategies = [sorted(v) for v in results.values()]
    if any(s != strategies[0] for s in strategies):
        raise ValueError("every problem must be run with the same strategies")


def average_rank(results: Mapping[str, Mapping[str, Mapping[int, Sequence[Optional[float]]]]],
                 bootstrap: int = 1000, seed: int = 0, level: float = 0.95) -> RankTable:
    """Rank best-feasible-so-far curves and average the ranks.

    ``results[problem][strategy][seed]`` is the per-iteration best feasible
    value (``None`` before the first feasible observation). Bootstrap
    intervals resample (problem, seed) pairs with replacement.
    """
    _check_coverage(results)
    if not results:
        return RankTable([], {}, {}, {}, {})
    strategies = sorted(next(iter(results.values())))
    cells = {}
    pair_means = []   # one row per (problem, seed): mean rank over iterations per strategy
    curves = []
    for problem in sorted(results):
        by_s = results[problem]
        seeds = sorted(by_s[strategies[0]])
        n_iter = len(by_s[strategies[0]][seeds[0]])
        for sd in seeds:
            R = np.empty((n_iter, len(strategies)))
            for it in range(n_iter):
                r = rank_cell({s: by_s[s][sd][it] for s in strategies})
                cells[(problem, it, sd)] = r
                R[it] = [r[s] for s in strategies]
            if n_iter:
                pair_means.append(R.mean(axis=0))
                curves.append(R)

    all_ranks = np.array([[cells[c][s] for s in strategies] for c in cells])
    mean_rank = {s: float(v) for s, v in zip(strategies, all_ranks.mean(axis=0))} if len(all_ranks) \
        else {s: float("nan") for s in strategies}
    per_iteration = {}
    if curves:
        # problems with different budgets are aligned on the shortest one
        n_min = min(len(R) for R in curves)
        avg = np.mean([R[:n_min] for R in curves], axis=0)
        per_iteration = {s: [float(v) for v in avg[:, j]] for j, s in enumerate(strategies)}
    ci = bootstrap_ci(np.array(pair_means), strategies, bootstrap, seed, level) if bootstrap else {}
    return RankTable(strategies, cells, mean_rank, per_iteration, ci)


def bootstrap_ci(pair_means: np.ndarray, strategies, n_resamples=1000, seed=0, level=0.95) -> dict:
    """Percentile intervals of the mean rank, resampling (problem, seed) rows."""
    if pair_means.size == 0:
        return {}
    rng = np.random.default_rng(seed)
    n = pair_means.shape[0]
    idx = rng.integers(0, n, size=(n_resamples, n))
    boot = pair_means[idx].mean(axis=1)
    lo, hi = np.percentile(boot, [50 * (1 - level), 50 * (1 + level)], axis=0)
    return {s: (float(lo[j]), float(hi[j])) for j, s in enumerate(strategies)}
