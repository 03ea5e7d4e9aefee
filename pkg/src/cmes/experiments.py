"""Canned benchmark protocols built on the suite runner."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from .problems import PROBLEMS
from .ranking import average_rank
from .suite import load_results, parse_config, run_suite


@dataclass
class HeadToHead:
    final_best: dict          # strategy -> list of per-seed final values (None if never feasible)
    medians: dict
    p_cmes_vs_random: float
    mean_rank: dict

    def to_dict(self):
        return asdict(self)


def _final(curves):
    return [curves[s][-1] for s in sorted(curves)]


def _as_floats(values):
    # a run that never found a feasible point counts as worse than any value
    return [np.inf if v is None else v for v in values]


def toy2d_head_to_head(out_dir, seeds: int = 20, budget: int = 50, p: float = 0.9,
                       workers: int = 1) -> HeadToHead:
    """cMES vs cEI vs random search on toy2d with binary feedback and hidden objective.

    All strategies with the same seed start from the same random design.
    """
    cfg = parse_config({
        "problems": ["toy2d"], "seeds": seeds, "budget": budget, "n_init": 5,
        "feedback": "binary_unobserved",
        "strategies": [{"strategy": "cmes", "p": p}, {"strategy": "cei", "p": p}, "random"],
    })
    run_suite(cfg, out_dir, workers=workers)
    res = {"toy2d": load_results(out_dir)["toy2d"]}
    finals = {s: _final(c) for s, c in res["toy2d"].items()}
    pval = float(stats.mannwhitneyu(_as_floats(finals["cmes"]), _as_floats(finals["random"]),
                                    alternative="less").pvalue)
    medians = {s: float(np.median(_as_floats(v))) for s, v in finals.items()}
    return HeadToHead(finals, medians, pval, average_rank(res, bootstrap=0).mean_rank)


def ystar_ablation(out_dir, sizes=(2, 10, 40), seeds: int = 3, budget: int = 20,
                   problems=None, workers: int = 1, bootstrap: int = 1000):
    """Run cMES with several y* sample counts on the bundled problems and rank them."""
    problems = sorted(PROBLEMS) if problems is None else list(problems)
    cfg = parse_config({
        "problems": problems, "seeds": seeds, "budget": budget, "n_init": 5,
        "strategies": [{"strategy": "cmes", "name": f"cmes_k{k}", "n_ystar": int(k)} for k in sizes],
    })
    run_suite(cfg, out_dir, workers=workers)
    names = {s.name for s in cfg.strategies}
    res = {p: {s: c for s, c in by_s.items() if s in names}
           for p, by_s in load_results(out_dir).items() if p in problems}
    return average_rank(res, bootstrap=bootstrap)


def write_json(obj, path):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
