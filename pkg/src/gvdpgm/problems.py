"""Problem builders and synthetic instance generators.

Each builder returns a :class:`~gvdpgm.core.CompositeObjective` whose
``f_value`` is ``inf`` outside the domain of ``f``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from itertools import combinations
from typing import Optional

import numpy as np

from . import _numeric
from .core import CompositeObjective, Point, Space
from .distances import De2Distance
from .errors import ConfigError, LoadError
from .penalties import (
    BlockPenalty,
    L1Penalty,
    Penalty,
    TrimmedExpPenalty,
    ZeroPenalty,
    log1p_exp,
    trimmed_exp_value,
    trimmed_l1_value,
    trimmed_logistic_value,
)
from .prox import pair_prox

__all__ = [
    "linex",
    "linex_deriv",
    "trimmed_l1_value",
    "trimmed_exp_value",
    "trimmed_logistic_value",
    "ClassificationData",
    "TrimmedLogisticProblem",
    "build_trimmed_logistic",
    "reformulated_min_over_z",
    "build_poisson_inverse",
    "build_klnmf",
    "build_quadratic",
    "quadratic_minimizer",
    "build_psd_demo",
    "build_soc_demo",
    "random_quadratic",
    "random_poisson",
    "random_klnmf",
    "random_classification",
]

_LINEX_CAP = 700.0


def _cap(xi):
    xi = np.asarray(xi, dtype=float)
    if np.any(xi > _LINEX_CAP):
        warnings.warn("LINEX argument above 700 clamped", RuntimeWarning, stacklevel=3)
        xi = np.minimum(xi, _LINEX_CAP)
    return xi


def linex(xi):
    """``e^xi - xi - 1``; arguments above 700 are clamped (with a warning)."""
    xi = _cap(xi)
    return np.expm1(xi) - xi


def linex_deriv(xi):
    return np.expm1(_cap(xi))


# ---------------------------------------------------------------------------
# trimmed logistic regression


@dataclass(frozen=True)
class ClassificationData:
    labels: np.ndarray
    features: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.labels, dtype=float).reshape(-1)
        A = np.atleast_2d(np.asarray(self.features, dtype=float))
        if b.size < 1:
            raise LoadError("need at least one sample")
        if A.shape[0] != b.size:
            raise LoadError(f"{b.size} labels but {A.shape[0]} feature rows")
        bad = np.nonzero(np.abs(b) != 1)[0]
        if bad.size:
            raise LoadError(f"label {b[bad[0]]!r} in row {bad[0] + 1} is not -1 or +1")
        if not np.all(np.isfinite(A)):
            raise LoadError("features must be finite")
        object.__setattr__(self, "labels", b)
        object.__setattr__(self, "features", A)

    @property
    def m(self) -> int:
        return self.labels.size

    @property
    def p(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class TrimmedLogisticProblem:
    data: ClassificationData
    K: int = 0
    lam: float = 0.0

    def __post_init__(self):
        if not 0 <= self.K <= self.data.m:
            raise ConfigError(f"trim count K={self.K} outside [0, {self.data.m}]")
        if self.lam < 0:
            raise ConfigError("lam must be nonnegative")

    def margins(self, x) -> np.ndarray:
        """``b_j <a_j, x>``."""
        return self.data.labels * (self.data.features @ np.asarray(x, dtype=float))

    def original_value(self, x) -> float:
        """Trimmed logistic loss plus ``lam ||x||_1``."""
        x = np.asarray(x, dtype=float)
        return trimmed_logistic_value(self.margins(x), self.K) + self.lam * float(np.sum(np.abs(x)))


def build_trimmed_logistic(problem: TrimmedLogisticProblem, gamma1: float = 1.0, gamma2: float = 1.0):
    """Reformulation over ``(x, z)`` with LINEX coupling.

    ``f(x, z) = sum_j linex(b_j <a_j, x> - z_j)`` and
    ``g(x, z) = lam ||x||_1 + T^exp_K(z)``.

    Returns
    -------
    (CompositeObjective, De2Distance, prox)
    """
    A, b = problem.data.features, problem.data.labels
    m, p = A.shape
    space = Space.product(Space.vector(p), Space.vector(m))
    BA = b[:, None] * A

    def residual(pt):
        return BA @ pt.data[:p] - pt.data[p:]

    def f_value(pt):
        return float(np.sum(linex(residual(pt))))

    def f_gradient(pt):
        lp = linex_deriv(residual(pt))
        return pt.like(np.concatenate([BA.T @ lp, -lp]))

    xpart = L1Penalty(problem.lam) if problem.lam > 0 else ZeroPenalty()
    g = BlockPenalty((xpart, TrimmedExpPenalty(problem.K)))
    obj = CompositeObjective(space, f_value, f_gradient, g, lower_bound_hint=0.0, name="trimmed_logistic")
    d = De2Distance(gamma1, gamma2)
    return obj, d, pair_prox(d, g)


def reformulated_min_over_z(problem: TrimmedLogisticProblem, x, numeric: bool = False) -> float:
    """``min_z`` of the reformulated objective at fixed ``x``.

    Every kept index set is enumerated. For a kept coordinate the inner
    minimum of ``linex(w - z) + e^-z`` is ``log(1 + e^-w)``; a trimmed one
    contributes 0 at ``z = w``. With ``numeric`` the kept values come from a
    scalar search instead of that identity.
    """
    x = np.asarray(x, dtype=float)
    w = problem.margins(x)
    if numeric:
        kept = np.array([
            _numeric.scalar_global_min(lambda z, wj=wj: linex(wj - z) + np.exp(-z), wj)[1] for wj in w
        ])
    else:
        kept = log1p_exp(-w)
    m = w.size
    best = min(
        (float(sum(kept[j] for j in lam)) for lam in combinations(range(m), m - problem.K)),
        default=0.0,
    )
    return best + problem.lam * float(np.sum(np.abs(x)))


# ---------------------------------------------------------------------------
# Poisson linear inverse problem


def build_poisson_inverse(A, b, g: Optional[Penalty] = None) -> CompositeObjective:
    """``f(x) = sum_j <a_j, x> - b_j log <a_j, x>`` on ``{x : Ax > 0}``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    if A.shape[0] != b.size:
        raise ConfigError(f"A has {A.shape[0]} rows, b has {b.size} entries")
    if np.any(A < 0):
        raise ConfigError("A must be entrywise nonnegative")
    zero = np.nonzero(~np.any(A > 0, axis=1))[0]
    if zero.size:
        raise ConfigError(f"row {zero[0] + 1} of A is zero")
    if np.any(b <= 0):
        raise ConfigError("b must be strictly positive")
    g = ZeroPenalty() if g is None else g

    def f_value(x):
        Ax = A @ x.data
        if np.any(Ax <= 0):
            return math.inf
        return float(np.sum(Ax - b * np.log(Ax)))

    def f_gradient(x):
        return x.like(A.T @ (1 - b / (A @ x.data)))

    return CompositeObjective(Space.vector(A.shape[1]), f_value, f_gradient, g,
                              lower_bound_hint=float(np.sum(b - b * np.log(b))), name="poisson")


# ---------------------------------------------------------------------------
# KL nonnegative matrix factorization


def build_klnmf(V, rank: int, g: Optional[Penalty] = None) -> CompositeObjective:
    """``f(W, H) = sum (WH) - sum_{V>0} V log(WH)`` over ``product(W, H)``.

    The log and ratio terms are restricted to the support of ``V``.
    """
    V = np.atleast_2d(np.asarray(V, dtype=float))
    if np.any(V < 0) or not np.any(V > 0):
        raise ConfigError("V must be nonnegative and not identically zero")
    if rank < 1:
        raise ConfigError("rank must be positive")
    m, n = V.shape
    space = Space.product(Space.matrix(m, rank), Space.matrix(rank, n))
    supp = V > 0
    Vs = V[supp]
    g = ZeroPenalty() if g is None else g

    def split(pt):
        W, H = pt.blocks
        return W.array, H.array

    def f_value(pt):
        W, H = split(pt)
        P = W @ H
        Ps = P[supp]
        if np.any(Ps <= 0):
            return math.inf
        return float(np.sum(P) - np.sum(Vs * np.log(Ps)))

    def f_gradient(pt):
        W, H = split(pt)
        P = W @ H
        R = np.ones_like(V)
        R[supp] -= Vs / P[supp]
        return pt.like(np.concatenate([(R @ H.T).reshape(-1), (W.T @ R).reshape(-1)]))

    lb = float(np.sum(Vs - Vs * np.log(Vs)))
    return CompositeObjective(space, f_value, f_gradient, g, lower_bound_hint=lb, name="klnmf")


# ---------------------------------------------------------------------------
# quadratic and conic demos


def quadratic_minimizer(Q, c) -> np.ndarray:
    return np.linalg.solve(np.asarray(Q, dtype=float), -np.asarray(c, dtype=float))


def build_quadratic(Q, c, g: Optional[Penalty] = None) -> CompositeObjective:
    """``f(x) = 1/2 <x, Qx> + <c, x>``.

    The lower-bound hint is the unconstrained minimum when ``Q`` is positive
    definite and ``g`` is nonnegative (zero or l1).
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    c = np.asarray(c, dtype=float).reshape(-1)
    if Q.shape != (c.size, c.size):
        raise ConfigError(f"Q has shape {Q.shape}, c has {c.size} entries")
    if not np.allclose(Q, Q.T):
        raise ConfigError("Q must be symmetric")
    Q = (Q + Q.T) / 2
    g = ZeroPenalty() if g is None else g
    lb = None
    if np.linalg.eigvalsh(Q)[0] > 0 and g.tag in ("zero", "l1", "trimmed_l1"):
        xs = quadratic_minimizer(Q, c)
        lb = float(0.5 * xs @ Q @ xs + c @ xs)

    def f_value(x):
        v = x.data
        return float(0.5 * v @ Q @ v + c @ v)

    def f_gradient(x):
        return x.like(Q @ x.data + c)

    return CompositeObjective(Space.vector(c.size), f_value, f_gradient, g, lower_bound_hint=lb, name="quadratic")


def build_psd_demo(M, g: Optional[Penalty] = None) -> CompositeObjective:
    """``f(X) = 1/2 ||X - M||_F^2`` on symmetric matrices."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    M = (M + M.T) / 2
    g = ZeroPenalty() if g is None else g
    return CompositeObjective(
        Space.symmetric(M.shape[0]),
        lambda X: 0.5 * float(np.sum((X.array - M) ** 2)),
        lambda X: X.like(X.array - M),
        g,
        lower_bound_hint=0.0,
        name="psd_demo",
    )


def build_soc_demo(m, g: Optional[Penalty] = None) -> CompositeObjective:
    """``f(x) = 1/2 ||x - m||^2`` on ``R^n``."""
    m = np.asarray(m, dtype=float).reshape(-1)
    g = ZeroPenalty() if g is None else g
    return CompositeObjective(
        Space.vector(m.size),
        lambda x: 0.5 * float(np.sum((x.data - m) ** 2)),
        lambda x: x.like(x.data - m),
        g,
        lower_bound_hint=0.0,
        name="soc_demo",
    )


# ---------------------------------------------------------------------------
# synthetic instances


def random_quadratic(n: int, cond: float, seed: int = 0):
    """Rotated quadratic with eigenvalues log-spaced in ``[1, cond]``."""
    rng = np.random.default_rng(seed)
    Qo, _ = np.linalg.qr(rng.standard_normal((n, n)))
    Q = (Qo * np.logspace(0, math.log10(cond), n)) @ Qo.T
    return (Q + Q.T) / 2, rng.standard_normal(n)


def random_poisson(m: int, n: int, seed: int = 0, noise: float = 0.05):
    """Nonnegative ``A`` with one boosted entry per row and ``b = (A x_true)(1 + noise N(0,1))``.

    With small noise the minimizer stays inside the orthant.
    """
    rng = np.random.default_rng(seed)
    A = rng.uniform(0, 1, (m, n)) * (rng.uniform(size=(m, n)) < 0.7)
    A[np.arange(m), rng.integers(0, n, m)] += 0.5
    x_true = rng.uniform(0.5, 2.0, n)
    b = (A @ x_true) * (1 + noise * rng.standard_normal(m))
    return A, np.maximum(b, 1e-3)


def random_klnmf(m: int, n: int, rank: int, seed: int = 0, noise: float = 0.0):
    """``V = W H`` from positive factors, optionally with multiplicative noise."""
    rng = np.random.default_rng(seed)
    W = rng.uniform(0.2, 1.5, (m, rank))
    H = rng.uniform(0.2, 1.5, (rank, n))
    return (W @ H) * np.exp(noise * rng.standard_normal((m, n)))


def random_classification(m: int, p: int, seed: int = 0, flip: float = 0.1) -> ClassificationData:
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, p))
    b = np.sign(A @ rng.standard_normal(p) + 1e-12)
    b[b == 0] = 1.0
    flip_idx = rng.uniform(size=m) < flip
    b[flip_idx] *= -1
    return ClassificationData(b, A)
