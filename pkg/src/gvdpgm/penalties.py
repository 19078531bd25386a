"""Nonsmooth terms ``g`` and the trimmed penalty evaluators.

Every penalty carries a ``tag`` used to look up a closed-form subproblem
solver for a given distance family. Separable penalties also expose
``groups``, a coordinate-level description used by the enumeration oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import Point, Space

__all__ = [
    "log1p_exp",
    "trimmed_sum",
    "trimmed_l1_value",
    "trimmed_exp_value",
    "trimmed_logistic_value",
    "PenaltyGroup",
    "Penalty",
    "ZeroPenalty",
    "L1Penalty",
    "TrimmedL1Penalty",
    "TrimmedExpPenalty",
    "ConeIndicator",
    "BlockPenalty",
]


def log1p_exp(t):
    """``log(1 + e^t)`` without overflow."""
    t = np.asarray(t, dtype=float)
    return np.where(t > 0, t + np.log1p(np.exp(-np.abs(t))), np.log1p(np.exp(np.minimum(t, 0))))


def kept_indices(values, K: int) -> np.ndarray:
    """Indices of the ``len(values) - K`` smallest entries, ascending index order.

    Ties are resolved in favour of the smaller index.
    """
    values = np.asarray(values, dtype=float)
    m = values.size
    if not 0 <= K <= m:
        raise ValueError(f"trim count K={K} outside [0, {m}]")
    return np.sort(np.argsort(values, kind="stable")[: m - K])


def trimmed_sum(values, K: int) -> float:
    """Sum of ``values`` after discarding the ``K`` largest entries."""
    values = np.asarray(values, dtype=float).reshape(-1)
    idx = kept_indices(values, K)
    return float(np.sum(values[idx])) if idx.size else 0.0


def trimmed_l1_value(x, K: int) -> float:
    return trimmed_sum(np.abs(np.asarray(x, dtype=float)), K)


def trimmed_exp_value(z, K: int) -> float:
    return trimmed_sum(np.exp(-np.asarray(z, dtype=float)), K)


def trimmed_logistic_value(z, K: int) -> float:
    return trimmed_sum(log1p_exp(-np.asarray(z, dtype=float)), K)


@dataclass(frozen=True)
class PenaltyGroup:
    """``min over kept sets of size n - K`` of ``sum coord(x_j)`` on a slice."""

    index: slice
    coord: Optional[Callable[[np.ndarray], np.ndarray]]
    K: int = 0
    nonneg: bool = False


class Penalty:
    tag = "abstract"

    def value(self, x: Point) -> float:
        raise NotImplementedError

    def __call__(self, x: Point) -> float:
        return self.value(x)

    def groups(self, space: Space) -> Optional[list[PenaltyGroup]]:
        """Coordinate-level description, or ``None`` if not separable."""
        return None


class ZeroPenalty(Penalty):
    tag = "zero"

    def value(self, x):
        return 0.0

    def groups(self, space):
        return [PenaltyGroup(slice(0, space.size), None)]

    def __repr__(self):
        return "ZeroPenalty()"


@dataclass(frozen=True)
class L1Penalty(Penalty):
    lam: float
    tag = "l1"

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")

    def value(self, x):
        return self.lam * float(np.sum(np.abs(x.data)))

    def groups(self, space):
        lam = self.lam
        return [PenaltyGroup(slice(0, space.size), lambda v: lam * np.abs(v))]


@dataclass(frozen=True)
class TrimmedL1Penalty(Penalty):
    """``lam * T_K(x)``; with ``nonneg`` the orthant indicator is added."""

    lam: float
    K: int
    nonneg: bool = False
    tag = "trimmed_l1"

    def __post_init__(self):
        if self.lam < 0 or self.K < 0:
            raise ValueError("lam and K must be nonnegative")

    def value(self, x):
        if self.nonneg and np.any(x.data < 0):
            return math.inf
        return self.lam * trimmed_l1_value(x.data, self.K)

    def groups(self, space):
        lam = self.lam
        return [PenaltyGroup(slice(0, space.size), lambda v: lam * np.abs(v), self.K, self.nonneg)]


@dataclass(frozen=True)
class TrimmedExpPenalty(Penalty):
    """``T^exp_K(z)``: sum of ``exp(-z_j)`` over all but the K largest."""

    K: int
    tag = "trimmed_exp"

    def value(self, x):
        return trimmed_exp_value(x.data, self.K)

    def groups(self, space):
        return [PenaltyGroup(slice(0, space.size), lambda v: np.exp(-v), self.K)]


@dataclass(frozen=True)
class ConeIndicator(Penalty):
    """Indicator of a closed cone: ``orthant``, ``psd`` or ``soc``."""

    cone: str
    tag = "indicator"

    def __post_init__(self):
        if self.cone not in ("orthant", "psd", "soc"):
            raise ValueError(f"unknown cone {self.cone!r}")

    def value(self, x):
        if self.cone == "orthant":
            ok = bool(np.all(x.data >= 0))
        elif self.cone == "psd":
            ok = bool(np.linalg.eigvalsh(x.array)[0] >= 0)
        else:
            v = x.data
            ok = bool(v[-1] >= np.linalg.norm(v[:-1]))
        return 0.0 if ok else math.inf

    def groups(self, space):
        if self.cone == "orthant":
            return [PenaltyGroup(slice(0, space.size), None, 0, True)]
        return None


@dataclass(frozen=True)
class BlockPenalty(Penalty):
    """Sum of per-block penalties on a product point."""

    parts: tuple
    tag = "block"

    def value(self, x):
        total = 0.0
        for part, blk in zip(self.parts, x.blocks):
            v = part.value(blk)
            if v == math.inf:
                return math.inf
            total += v
        return total

    def groups(self, space):
        out = []
        for part, sub, sl in zip(self.parts, space.blocks, space.block_slices()):
            sub_groups = part.groups(sub)
            if sub_groups is None:
                return None
            for grp in sub_groups:
                start = sl.start + grp.index.start
                out.append(PenaltyGroup(slice(start, start + (grp.index.stop - grp.index.start)),
                                        grp.coord, grp.K, grp.nonneg))
        return out
