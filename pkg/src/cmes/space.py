"""Mixed search spaces and their relaxed [0, 1] encoding."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np


@dataclass(frozen=True)
class Continuous:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("continuous dimension needs lo < hi")

    width = 1


@dataclass(frozen=True)
class Integer:
    lo: int
    hi: int

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("integer dimension needs lo < hi")

    width = 1


@dataclass(frozen=True)
class Categorical:
    levels: tuple

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        if len(self.levels) < 1:
            raise ValueError("categorical dimension needs at least one level")

    @property
    def width(self):
        return len(self.levels)


Dim = Union[Continuous, Integer, Categorical]


@dataclass(frozen=True)
class SearchSpace:
    dims: tuple

    def __init__(self, dims: Sequence[Dim]):
        object.__setattr__(self, "dims", tuple(dims))

    @property
    def encoded_dim(self) -> int:
        return sum(d.width for d in self.dims)

    def encode(self, x) -> np.ndarray:
        return encode(x, self)

    def decode(self, v) -> tuple:
        return decode(v, self)


def encode(x, space: SearchSpace) -> np.ndarray:
    """Map a point to the unit cube; categoricals become one-hot blocks."""
    if len(x) != len(space.dims):
        raise ValueError("point has the wrong number of coordinates")
    out = []
    for value, d in zip(x, space.dims):
        if isinstance(d, Categorical):
            if value not in d.levels:
                raise ValueError(f"{value!r} is not a level of {d.levels}")
            block = np.zeros(d.width)
            block[d.levels.index(value)] = 1.0
            out.extend(block)
        else:
            if not d.lo <= value <= d.hi:
                raise ValueError(f"{value!r} outside [{d.lo}, {d.hi}]")
            out.append((value - d.lo) / (d.hi - d.lo))
    return np.asarray(out, dtype=float)


def decode(v, space: SearchSpace) -> tuple:
    """Inverse of :func:`encode`; integers round half up, argmax picks the level."""
    v = np.asarray(v, dtype=float).ravel()
    if v.shape[0] != space.encoded_dim:
        raise ValueError("encoded vector has the wrong length")
    out = []
    i = 0
    for d in space.dims:
        if isinstance(d, Categorical):
            out.append(d.levels[int(np.argmax(v[i:i + d.width]))])
        elif isinstance(d, Integer):
            u = min(max(v[i], 0.0), 1.0)
            out.append(int(min(max(np.floor(d.lo + u * (d.hi - d.lo) + 0.5), d.lo), d.hi)))
        else:
            u = min(max(v[i], 0.0), 1.0)
            out.append(float(d.lo + u * (d.hi - d.lo)))
        i += d.width
    return tuple(out)


def snap(v, space: SearchSpace) -> np.ndarray:
    """Encoded vector of the point that ``v`` decodes to."""
    return encode(decode(v, space), space)


def continuous_mask(space: SearchSpace) -> np.ndarray:
    mask = []
    for d in space.dims:
        mask.extend([isinstance(d, Continuous)] * d.width)
    return np.asarray(mask, dtype=bool)
