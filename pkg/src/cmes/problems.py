"""Bundled constrained test problems.

Every problem exposes ``space`` and ``evaluate(x) -> (objective, constraint)``
with feasibility meaning ``constraint <= 0``; :func:`make_blackbox` turns it
into the (z_y, z_c) contract of a given feedback mode.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .space import Categorical, Continuous, Integer, SearchSpace

TOY_CENTERS = ((-0.7, 0.5), (0.5, 0.3), (-0.3, -0.3))
TOY_DIVISORS = (0.02, 0.2, 0.6)
TOY_OFFSETS = (0.3, 0.6, 0.9)
TOY_THRESHOLD = 1.2


def toy2d(x: float, y: float):
    """Three shifted quadratics on [-1, 1]^2; feasible where the value is below 1.2."""
    if not (-1 <= x <= 1 and -1 <= y <= 1):
        raise ValueError("toy2d is defined on [-1, 1]^2")
    value = min(((cx - x) ** 2 + (cy - y) ** 2) / d + o
                for (cx, cy), d, o in zip(TOY_CENTERS, TOY_DIVISORS, TOY_OFFSETS))
    return value, value < TOY_THRESHOLD


def branin(x1, x2):
    a, b, c = 1.0, 5.1 / (4 * np.pi ** 2), 5.0 / np.pi
    r, s, t = 6.0, 10.0, 1.0 / (8 * np.pi)
    return a * (x2 - b * x1 ** 2 + c * x1 - r) ** 2 + s * (1 - t) * np.cos(x1) + s


_H3_A = np.array([[3.0, 10, 30], [0.1, 10, 35], [3.0, 10, 30], [0.1, 10, 35]])
_H3_C = np.array([1.0, 1.2, 3.0, 3.2])
_H3_P = 1e-4 * np.array([[3689, 1170, 2673], [4699, 4387, 7470],
                         [1091, 8732, 5547], [381, 5743, 8828]])


def hartmann3(x):
    x = np.asarray(x, dtype=float)
    return -float(np.sum(_H3_C * np.exp(-np.sum(_H3_A * (x - _H3_P) ** 2, axis=1))))


@dataclass(frozen=True)
class Problem:
    name: str
    space: SearchSpace
    evaluate: Callable

    def feasible(self, x) -> bool:
        return self.evaluate(x)[1] <= 0


def _toy_eval(x):
    value, _ = toy2d(*x)
    return value, value - TOY_THRESHOLD


def _branin_eval(x):
    # feasible disc around the centre; two of the three global minima lie outside
    x1, x2 = x
    return float(branin(x1, x2)), (x1 - 2.5) ** 2 + (x2 - 7.5) ** 2 - 50.0


def _hartmann_eval(x):
    # unit-ball constraint excludes the unconstrained minimiser (norm ~1.03)
    return hartmann3(x), float(np.sum(np.square(x))) - 1.0


_MIX_OFFSET = {"a": 0.0, "b": 0.4, "c": 1.0}


def _mixed_eval(x):
    x1, x2, k, cat = x
    obj = (x1 - 0.6) ** 2 + (x2 + 0.4) ** 2 + 0.15 * (k - 4) ** 2 + _MIX_OFFSET[cat]
    con = x1 - x2 + 0.25 * k - 1.5
    return float(obj), float(con)


PROBLEMS = {
    "toy2d": Problem("toy2d", SearchSpace([Continuous(-1, 1), Continuous(-1, 1)]), _toy_eval),
    "branin": Problem("branin", SearchSpace([Continuous(-5, 10), Continuous(0, 15)]), _branin_eval),
    "hartmann3": Problem("hartmann3", SearchSpace([Continuous(0, 1)] * 3), _hartmann_eval),
    "mixed4d": Problem("mixed4d", SearchSpace([Continuous(-1, 1), Continuous(-1, 1), Integer(0, 5),
                                               Categorical(("a", "b", "c"))]), _mixed_eval),
}


def get_problem(name: str) -> Problem:
    try:
        return PROBLEMS[name]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None


def make_blackbox(problem: Problem, feedback: str):
    """Wrap a problem into the (z_y, z_c) evaluation contract of ``feedback``."""
    def blackbox(x):
        obj, con = problem.evaluate(x)
        if feedback == "real_valued":
            return obj, con
        z_c = -1.0 if con <= 0 else 1.0
        if feedback == "binary_unobserved" and z_c > 0:
            return None, z_c
        return obj, z_c
    return blackbox
