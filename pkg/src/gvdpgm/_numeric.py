"""Derivative-free minimization helpers shared by the oracles and the fallback prox.

Everything here works from objective values only, so it stays independent
of the closed-form solvers it is used to check.
"""

from __future__ import annotations

import math
from itertools import combinations
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .core import Point, Space
from .errors import NumericError

_GRID = 2001


# ---------------------------------------------------------------------------
# one-dimensional global search


def _grid_points(center: float, width: float, lower: float) -> np.ndarray:
    lo, hi = center - width, center + width
    pts = np.linspace(lo, hi, _GRID)
    if lower > -math.inf:
        hi = max(hi, lower + 1.0)
        pts = np.linspace(lower, hi, _GRID)[1:]
        geo = lower + (hi - lower) * np.logspace(-16, 0, 400)
        pts = np.union1d(pts, geo)
    return pts


def scalar_global_min(fn: Callable[[np.ndarray], np.ndarray], center: float,
                      lower: float = -math.inf, extra=(), tol: float = 1e-13) -> tuple[float, float]:
    """Global minimum of a coercive scalar function.

    A grid around ``center`` is widened until the grid minimizer is interior,
    then the bracketing cell is refined with Brent's bounded method.
    ``extra`` lists candidate points (kinks) evaluated exactly.

    Returns
    -------
    (t, value)
    """
    width = 2.0 + abs(center)
    for _ in range(60):
        pts = _grid_points(center, width, lower)
        vals = np.asarray(fn(pts), dtype=float)
        vals = np.where(np.isnan(vals), np.inf, vals)
        i = int(np.argmin(vals))
        if 0 < i < pts.size - 1 or (i == 0 and lower > -math.inf):
            break
        width *= 4
    else:
        raise NumericError("scalar search did not find an interior minimizer")
    if i > 0:
        a = pts[i - 1]
    else:
        a = lower + (pts[0] - lower) * 1e-6
    b = pts[min(i + 1, pts.size - 1)]
    res = minimize_scalar(lambda t: float(fn(np.array([t]))[0]), bounds=(a, b), method="bounded",
                          options={"xatol": tol * max(1.0, abs(pts[i])), "maxiter": 2000})
    best_t, best_v = float(pts[i]), float(vals[i])
    if res.fun <= best_v:
        best_t, best_v = float(res.x), float(res.fun)
    for t in extra:
        if lower < t:
            v = float(fn(np.array([float(t)]))[0])
            if v <= best_v:
                best_t, best_v = float(t), v
    return best_t, best_v


# ---------------------------------------------------------------------------
# parametrizations: flat point storage <-> free coordinates


class Param:
    """Maps a space to ``R^d`` so symmetric blocks are not double counted.

    Off-diagonal entries of symmetric blocks are scaled by ``sqrt(2)`` so the
    Euclidean norm of parameters equals the Frobenius norm of the point.
    """

    def __init__(self, space: Space):
        self.space = space
        self.parts = []
        blocks = space.blocks if space.kind == "product" else (space,)
        slices = space.block_slices() if space.kind == "product" else [slice(0, space.size)]
        for b, sl in zip(blocks, slices):
            if b.kind == "symmetric":
                self.parts.append(("sym", sl, b.shape[0]))
            else:
                self.parts.append(("flat", sl, b.size))
        self.dim = sum(n * (n + 1) // 2 if kind == "sym" else n for kind, _, n in self.parts)

        # both maps are linear: tabulate them once
        self._to_flat = np.column_stack([self._unpack(e) for e in np.eye(self.dim)]) if self.dim else np.zeros((0, 0))
        self._to_params = np.linalg.pinv(self._to_flat)

    def _unpack(self, v: np.ndarray) -> np.ndarray:
        flat = np.empty(self.space.size)
        pos = 0
        for kind, sl, n in self.parts:
            if kind == "sym":
                k = n * (n + 1) // 2
                iu = np.triu_indices(n)
                scale = np.where(iu[0] == iu[1], 1.0, 1 / math.sqrt(2))
                M = np.zeros((n, n))
                M[iu] = v[pos:pos + k] * scale
                M = M + np.triu(M, 1).T
                flat[sl] = M.reshape(-1)
                pos += k
            else:
                flat[sl] = v[pos:pos + n]
                pos += n
        return flat

    def to_params(self, p: Point) -> np.ndarray:
        return self._to_params @ p.data

    def to_point(self, v: np.ndarray) -> Point:
        return Point(self.space, self._to_flat @ v)


# ---------------------------------------------------------------------------
# finite differences and Newton polish


def fd_gradient(fn: Callable[[np.ndarray], float], v: np.ndarray, h: float = 1e-5) -> np.ndarray:
    g = np.empty_like(v)
    for i in range(v.size):
        e = np.zeros_like(v)
        e[i] = h * max(1.0, abs(v[i]))
        g[i] = (fn(v + e) - fn(v - e)) / (2 * e[i])
    return g


def fd_hessian(fn: Callable[[np.ndarray], float], v: np.ndarray, h: float = 1e-4) -> np.ndarray:
    d = v.size
    H = np.empty((d, d))
    f0 = fn(v)
    steps = h * np.maximum(1.0, np.abs(v))
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = steps[i]
        H[i, i] = (fn(v + ei) - 2 * f0 + fn(v - ei)) / steps[i] ** 2
        for j in range(i + 1, d):
            ej = np.zeros(d)
            ej[j] = steps[j]
            H[i, j] = H[j, i] = (
                fn(v + ei + ej) - fn(v + ei - ej) - fn(v - ei + ej) + fn(v - ei - ej)
            ) / (4 * steps[i] * steps[j])
    return H


def newton_polish(fn: Callable[[np.ndarray], float], v0: np.ndarray, iters: int = 30,
                  gtol: float = 1e-10) -> tuple[np.ndarray, float]:
    """Damped Newton with finite-difference derivatives and backtracking.

    Only objective values are used; the objective may return ``inf`` outside
    its domain, which simply shortens the step. After two full Newton
    iterations the Hessian (by far the most expensive part) is reused for
    up to four undamped steps. Stops when a step predicts a decrease below
    ``1e-18 max(1, |f|)``.
    """
    v, f = np.array(v0, dtype=float), fn(v0)
    if not math.isfinite(f):
        return v, f
    H, shift, age = None, 0.0, 0
    for k in range(iters):
        g = fd_gradient(fn, v)
        if not np.all(np.isfinite(g)):
            break
        if np.linalg.norm(g) <= gtol * max(1.0, abs(f)):
            break
        fresh = H is None or k < 2 or age >= 4
        if fresh:
            age = 0
            H = fd_hessian(fn, v)
            H = (H + H.T) / 2
            lam_min = np.linalg.eigvalsh(H)[0] if np.all(np.isfinite(H)) else -1.0
            shift = 0.0 if lam_min > 1e-12 else 1e-8 - lam_min + 1e-6 * abs(lam_min)
        try:
            step = -np.linalg.solve(H + shift * np.eye(v.size), g) if np.all(np.isfinite(H)) else -g
        except np.linalg.LinAlgError:
            step = -g
        decrement = -float(g @ step)
        t, improved = 1.0, False
        for _ in range(60):
            cand = v + t * step
            fc = fn(cand)
            if fc < f:
                v, f, improved = cand, fc, True
                break
            t /= 2
        if not improved:
            # at the noise floor, or a stale Hessian: refresh once
            if fresh or decrement <= 1e-14 * max(1.0, abs(f)):
                break
            H = None
            continue
        age += 1
        if t < 1.0:
            H = None
        if t == 1.0 and shift == 0.0 and 0 <= decrement <= 1e-18 * max(1.0, abs(f)):
            break
    return v, f


def multistart_minimize(fn: Callable[[np.ndarray], float], starts: list[np.ndarray],
                        smooth: bool = True) -> tuple[np.ndarray, float]:
    """Best local minimum over ``starts``: Powell search followed by Newton polish."""
    best_v, best_f = None, math.inf
    for s in starts:
        if not math.isfinite(fn(s)):
            continue
        res = minimize(fn, s, method="Powell", options={"xtol": 1e-10, "ftol": 1e-14, "maxfev": 40000})
        v, f = np.asarray(res.x, dtype=float), float(res.fun)
        if not math.isfinite(f):
            v, f = s, fn(s)
        if smooth:
            v, f = newton_polish(fn, v)
        if f < best_f:
            best_v, best_f = v, f
    if best_v is None:
        raise NumericError("every start point lies outside the objective domain")
    return best_v, best_f


# ---------------------------------------------------------------------------
# separable enumeration


def separable_minimize(coords: list, groups: list, tie_tol: float = 1e-9, cap: int = 8):
    """Minimize ``sum_j c_j(t_j) + min over kept sets of sum_{j kept} p_j(t_j)``.

    Parameters
    ----------
    coords : list of (fn0, fn1, center, lower, kinks)
        Per coordinate: objective without the penalty term, with it, the
        search centre, the open lower end of the domain and kink candidates.
    groups : list of (indices, K)
        Coordinates sharing a trimmed penalty; ``K`` entries are dropped.

    Returns
    -------
    (t, value, unique)
    """
    n = len(coords)
    t0, v0, t1, v1 = np.empty(n), np.empty(n), np.empty(n), np.empty(n)
    for j, (fn0, fn1, center, lower, kinks) in enumerate(coords):
        t0[j], v0[j] = scalar_global_min(fn0, center, lower, kinks)
        if fn1 is fn0:
            t1[j], v1[j] = t0[j], v0[j]
        else:
            t1[j], v1[j] = scalar_global_min(fn1, center, lower, kinks)
    t = np.empty(n)
    total, unique = 0.0, True
    for idx, K in groups:
        idx = list(idx)
        keep = len(idx) - K
        if K == 0:
            t[idx] = t1[idx]
            total += float(np.sum(v1[idx]))
            continue
        if len(idx) > cap:
            raise NumericError(f"enumeration capped at {cap} coordinates per group")
        scored = []
        for lam in combinations(idx, keep):
            kept = set(lam)
            val = sum(v1[j] if j in kept else v0[j] for j in idx)
            scored.append((val, lam))
        scored.sort(key=lambda s: s[0])
        best_val, best = scored[0]
        kept = set(best)
        for j in idx:
            t[j] = t1[j] if j in kept else t0[j]
        if len(scored) > 1 and scored[1][0] - best_val <= tie_tol:
            other = set(scored[1][1])
            alt = np.array([t1[j] if j in other else t0[j] for j in idx])
            if np.max(np.abs(alt - t[idx])) > 1e-6:
                unique = False
        total += best_val
    return t, total, unique
