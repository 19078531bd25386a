"""Ambient-space points, objective containers, solver configuration and traces."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, SpaceMismatchError

__all__ = [
    "Space",
    "Point",
    "CompositeObjective",
    "SolverConfig",
    "IterationRecord",
    "Trace",
    "TRACE_COLUMNS",
    "composite_value",
    "point_inner",
]


@dataclass(frozen=True)
class Space:
    """Shape descriptor of an ambient space.

    ``kind`` is one of ``vector``, ``matrix``, ``symmetric`` or ``product``.
    Product spaces keep their blocks in a fixed order; the flat storage of a
    product point is the concatenation of the flat storage of its blocks.
    """

    kind: str
    shape: tuple[int, ...] = ()
    blocks: tuple["Space", ...] = ()

    def __post_init__(self):
        if self.kind == "product":
            if not self.blocks:
                raise ValueError("a product space needs at least one block")
        elif self.kind not in ("vector", "matrix", "symmetric"):
            raise ValueError(f"unknown space kind {self.kind!r}")

    @classmethod
    def vector(cls, n: int) -> "Space":
        return cls("vector", (int(n),))

    @classmethod
    def matrix(cls, m: int, n: int) -> "Space":
        return cls("matrix", (int(m), int(n)))

    @classmethod
    def symmetric(cls, n: int) -> "Space":
        return cls("symmetric", (int(n), int(n)))

    @classmethod
    def product(cls, *blocks: "Space") -> "Space":
        return cls("product", (), tuple(blocks))

    @property
    def size(self) -> int:
        if self.kind == "product":
            return sum(b.size for b in self.blocks)
        return int(np.prod(self.shape))

    def block_slices(self) -> list[slice]:
        out, start = [], 0
        for b in self.blocks:
            out.append(slice(start, start + b.size))
            start += b.size
        return out

    def __str__(self):
        if self.kind == "product":
            return "product(" + ", ".join(str(b) for b in self.blocks) + ")"
        return f"{self.kind}{self.shape}"


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Point:
    """An element of a finite-dimensional real inner-product space.

    Data is held as a read-only flat float64 array. Symmetric points are
    symmetrized on construction, so ``X[i, j] == X[j, i]`` holds exactly.
    """

    space: Space
    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=float).reshape(-1)
        if data.size != self.space.size:
            raise SpaceMismatchError(
                f"{data.size} entries given for {self.space} (needs {self.space.size})"
            )
        if not np.all(np.isfinite(data)):
            raise ValueError("point entries must be finite")
        if self.space.kind == "symmetric":
            M = data.reshape(self.space.shape)
            data = ((M + M.T) / 2).reshape(-1)
        elif self.space.kind == "product":
            for sl, b in zip(self.space.block_slices(), self.space.blocks):
                if b.kind == "symmetric":
                    M = data[sl].reshape(b.shape)
                    data[sl] = ((M + M.T) / 2).reshape(-1)
        object.__setattr__(self, "data", _freeze(data))

    # constructors -----------------------------------------------------
    @classmethod
    def vector(cls, values) -> "Point":
        v = np.asarray(values, dtype=float).reshape(-1)
        return cls(Space.vector(v.size), v)

    @classmethod
    def matrix(cls, values) -> "Point":
        M = np.atleast_2d(np.asarray(values, dtype=float))
        return cls(Space.matrix(*M.shape), M)

    @classmethod
    def symmetric(cls, values) -> "Point":
        M = np.atleast_2d(np.asarray(values, dtype=float))
        if M.shape[0] != M.shape[1]:
            raise SpaceMismatchError(f"symmetric point needs a square array, got {M.shape}")
        return cls(Space.symmetric(M.shape[0]), M)

    @classmethod
    def product(cls, *blocks: "Point") -> "Point":
        space = Space.product(*(b.space for b in blocks))
        return cls(space, np.concatenate([b.data for b in blocks]))

    def like(self, flat) -> "Point":
        """New point in the same space built from flat storage."""
        return Point(self.space, flat)

    # views ------------------------------------------------------------
    @property
    def array(self) -> np.ndarray:
        """Data reshaped to the natural shape (flat for product points)."""
        if self.space.kind == "product":
            return self.data
        return self.data.reshape(self.space.shape)

    @property
    def blocks(self) -> tuple["Point", ...]:
        if self.space.kind != "product":
            return (self,)
        return tuple(
            Point(b, self.data[sl])
            for b, sl in zip(self.space.blocks, self.space.block_slices())
        )

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    # arithmetic -------------------------------------------------------
    def _check(self, other: "Point"):
        if not isinstance(other, Point) or other.space != self.space:
            raise SpaceMismatchError(f"{getattr(other, 'space', type(other))} vs {self.space}")

    def __add__(self, other: "Point") -> "Point":
        self._check(other)
        return self.like(self.data + other.data)

    def __sub__(self, other: "Point") -> "Point":
        self._check(other)
        return self.like(self.data - other.data)

    def __mul__(self, scalar: float) -> "Point":
        return self.like(self.data * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "Point":
        return self.like(-self.data)

    def __repr__(self):
        return f"Point({self.space}, {np.array2string(self.array, precision=6)})"


def point_inner(x: Point, y: Point) -> float:
    """Euclidean / Frobenius inner product; product spaces sum over blocks."""
    if x.space != y.space:
        raise SpaceMismatchError(f"inner product of {x.space} and {y.space}")
    return float(np.dot(x.data, y.data))


@dataclass(frozen=True)
class CompositeObjective:
    """``F = f + g`` with smooth ``f`` and a tagged nonsmooth ``g``.

    ``f_value`` returns ``inf`` outside the domain of ``f``; ``f_gradient``
    is only called at points where ``f_value`` is finite.
    """

    space: Space
    f_value: Callable[[Point], float]
    f_gradient: Callable[[Point], Point]
    g: object  # a penalties.Penalty
    lower_bound_hint: Optional[float] = None
    name: str = ""

    @property
    def g_tag(self) -> str:
        return self.g.tag

    def value(self, x: Point) -> float:
        return composite_value(self, x)


def composite_value(obj: CompositeObjective, x: Point) -> float:
    """``f(x) + g(x)``; ``inf`` if either term is infinite, never NaN."""
    if x.space != obj.space:
        raise SpaceMismatchError(f"objective lives in {obj.space}, point in {x.space}")
    fv = float(obj.f_value(x))
    if math.isnan(fv) or fv == math.inf:
        return math.inf
    gv = float(obj.g.value(x))
    if math.isnan(gv) or gv == math.inf:
        return math.inf
    return fv + gv


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of the outer/inner loops.

    ``p_schedule`` maps the iteration index ``k + 1`` to the merit weight;
    ``None`` means the constant ``p_min``.
    """

    beta: float = 2.0
    sigma: float = 1e-4
    p_min: float = 1.0
    p_schedule: Optional[Callable[[int], float]] = None
    max_outer_iters: int = 100_000
    max_inner_iters: int = 60
    tol_residual: float = 1e-6
    tol_step: float = 1e-10

    def __post_init__(self):
        if not self.beta > 1:
            raise ConfigError(f"beta must exceed 1, got {self.beta}")
        if not 0 < self.sigma < 1:
            raise ConfigError(f"sigma must lie in (0, 1), got {self.sigma}")
        if not 0 < self.p_min <= 1:
            raise ConfigError(f"p_min must lie in (0, 1], got {self.p_min}")
        if int(self.max_outer_iters) < 1 or int(self.max_inner_iters) < 1:
            raise ConfigError("iteration budgets must be positive")
        if not (self.tol_residual > 0 and self.tol_step > 0):
            raise ConfigError("tolerances must be positive")

    def p(self, k: int) -> float:
        if self.p_schedule is None:
            return self.p_min
        value = float(self.p_schedule(k))
        if not self.p_min <= value <= 1:
            raise ConfigError(f"p_schedule({k}) = {value} outside [{self.p_min}, 1]")
        return value


TRACE_COLUMNS = (
    "k",
    "F_x",
    "F_merit",
    "i_k",
    "beta_pow_ik",
    "D_step",
    "step_norm",
    "residual_norm",
    "wall_ms",
)


@dataclass(frozen=True)
class IterationRecord:
    """Summary of the transition ``x^k -> x^{k+1}``.

    ``F_x`` and ``F_merit`` are the objective and merit value *after* the
    step, ``D_step`` is ``D_k(x^{k+1}, x^k)`` and ``residual_norm`` the norm
    of the explicit subgradient of ``F`` at ``x^{k+1}`` (NaN if unavailable).
    """

    k: int
    F_x: float
    F_merit: float
    i_k: int
    beta_pow_ik: float
    D_step: float
    step_norm: float
    residual_norm: float
    wall_ms: float
    interior_margin: float = math.inf
    approximate: bool = False

    def row(self) -> tuple:
        return tuple(getattr(self, c) for c in TRACE_COLUMNS)


@dataclass
class Trace:
    """Everything a run produced. Owned by a single run."""

    x0: Point
    F0: float
    records: list[IterationRecord] = field(default_factory=list)
    x: Optional[Point] = None
    termination: Optional[str] = None
    boundary_flag: bool = False

    @property
    def F_values(self) -> np.ndarray:
        """``F(x^0), F(x^1), ...``."""
        return np.array([self.F0] + [r.F_x for r in self.records])

    @property
    def merit_values(self) -> np.ndarray:
        """``F_0, F_1, ...``."""
        return np.array([self.F0] + [r.F_merit for r in self.records])

    @property
    def interior_ok(self) -> bool:
        return all(r.interior_margin > 0 for r in self.records)

    @property
    def approximate(self) -> bool:
        return any(r.approximate for r in self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def __len__(self):
        return len(self.records)

