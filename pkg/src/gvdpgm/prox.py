"""Subproblem solvers ``argmin_x <a, x> + gamma * D(x, y) + g(x)``.

Closed forms are provided for every (distance, penalty) pairing with a known
solution; :func:`prox_generic` is the numeric fallback. :func:`pair_prox`
selects the solver for a distance/penalty pair, and each solver reports
whether its output is approximate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import _numeric
from .core import Point
from .distances import (
    De2Distance,
    ExpDistance,
    MetricDistance,
    OrthantDistance,
    ProxGradDistance,
    PSDDistance,
    SOCDistance,
    SqNormDistance,
    _jmul,
    _lorentz,
)
from .errors import DomainError, NumericError
from .penalties import (
    BlockPenalty,
    ConeIndicator,
    L1Penalty,
    Penalty,
    TrimmedExpPenalty,
    TrimmedL1Penalty,
    ZeroPenalty,
    kept_indices,
)

__all__ = [
    "ProxResult",
    "subproblem_value",
    "prox_sqnorm_l1",
    "exp_trimmed_scores",
    "prox_exp_trimmed",
    "interior_scalar_root",
    "orthant_trimmed_scores",
    "prox_orthant_smooth",
    "prox_orthant_trimmed_l1",
    "prox_psd_smooth",
    "soc_reduced_root",
    "prox_soc_smooth",
    "prox_de2_trimmed_logistic",
    "prox_generic",
    "pair_prox",
]


@dataclass(frozen=True)
class ProxResult:
    x: Point
    approximate: bool = False


def subproblem_value(a: Point, y: Point, gamma: float, d: ProxGradDistance, g: Penalty, x: Point) -> float:
    """``<a, x> + gamma * D(x, y) + g(x)``; ``inf`` outside the domain."""
    dv = d.value(x, y)
    if dv == math.inf:
        return math.inf
    gv = g.value(x)
    if gv == math.inf:
        return math.inf
    return float(np.dot(a.data, x.data)) + gamma * dv + gv


# ---------------------------------------------------------------------------
# squared norm


def prox_sqnorm_l1(a, y, gamma: float, lam: float = 0.0) -> np.ndarray:
    """Soft threshold: minimizer of ``<a,x> + gamma/2 ||x-y||^2 + lam ||x||_1``."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    s = np.asarray(y, dtype=float) - np.asarray(a, dtype=float) / gamma
    return np.sign(s) * np.maximum(np.abs(s) - lam / gamma, 0.0)


# ---------------------------------------------------------------------------
# exponential distance with trimmed exponential penalty


def _exp_roots(a, w, gamma):
    """``sqrt(a^2+gamma^2) - a`` and ``sqrt(a^2+gamma^2+2 gamma e^-w) - a``, cancellation-free.

    Also returns their difference, computed without subtraction.
    """
    a = np.asarray(a, dtype=float)
    e = np.exp(-np.asarray(w, dtype=float))
    rb = np.hypot(a, gamma)
    ra = np.sqrt(rb**2 + 2 * gamma * e)
    pos = a > 0
    s0 = np.where(pos, gamma**2 / (rb + np.abs(a)), rb - a)
    s1 = np.where(pos, (gamma**2 + 2 * gamma * e) / (ra + np.abs(a)), ra - a)
    delta = 2 * gamma * e / (ra + rb)
    return s0, s1, delta


def exp_trimmed_scores(a, w, gamma: float) -> np.ndarray:
    """Cost of keeping coordinate ``j`` in the penalty minus the cost of trimming it."""
    a = np.asarray(a, dtype=float)
    s0, _, delta = _exp_roots(a, w, gamma)
    return a * np.log1p(delta / s0) + delta


def prox_exp_trimmed(a, w, gamma: float, K: int) -> np.ndarray:
    """Global minimizer of ``<a,z> + gamma * sum psi(z - w) + T^exp_K(z)``.

    The ``m - K`` coordinates with the smallest scores are kept in the
    penalty (ties go to the smaller index).
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    a = np.asarray(a, dtype=float)
    w = np.asarray(w, dtype=float)
    s0, s1, _ = _exp_roots(a, w, gamma)
    z = w - math.log(gamma) + np.log(s0)
    keep = kept_indices(exp_trimmed_scores(a, w, gamma), K)
    z[keep] = (w - math.log(gamma) + np.log(s1))[keep]
    return z


# ---------------------------------------------------------------------------
# orthant distance


def _orthant_coeffs(alpha, ups, g1, g2, r):
    ups = np.asarray(ups, dtype=float)
    if np.any(ups <= 0):
        raise DomainError("centre must be strictly positive")
    b = np.asarray(alpha, dtype=float) + g1 * ups ** (r - 1) - g2 * ups
    c = g1 * ups**r
    return b, c


def _positive_root(b, c, g2):
    """Positive root of ``g2 t^2 + b t - c`` for ``c > 0``."""
    disc = np.sqrt(b * b + 4 * g2 * c)
    big = b > 0
    return np.where(big, 2 * c / (np.abs(b) + disc), (disc - np.minimum(b, 0)) / (2 * g2))


def interior_scalar_root(alpha, ups, g1: float, g2: float, r: float):
    """Unique positive root of ``g2 t^2 + (alpha + g1 ups^(r-1) - g2 ups) t - g1 ups^r``."""
    b, c = _orthant_coeffs(alpha, ups, g1, g2, r)
    out = _positive_root(b, c, g2)
    return float(out) if np.ndim(out) == 0 else out


def _upsilon(t, b, c, g2):
    return b * t + 0.5 * g2 * t * t - c * np.log(t)


def orthant_trimmed_scores(a, y, g1, g2, r, lam) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b0, c = _orthant_coeffs(a, y, g1, g2, r)
    b1 = b0 + lam
    t0, t1 = _positive_root(b0, c, g2), _positive_root(b1, c, g2)
    return _upsilon(t1, b1, c, g2) - _upsilon(t0, b0, c, g2)


def prox_orthant_smooth(a, y, g1: float, g2: float, r: float) -> np.ndarray:
    return np.asarray(interior_scalar_root(a, y, g1, g2, r), dtype=float).reshape(np.shape(a))


def prox_orthant_trimmed_l1(a, y, g1: float, g2: float, r: float, lam: float, K: int) -> np.ndarray:
    """Global minimizer of ``<a,x> + D(x, y) + lam T_K(x)`` over the open orthant."""
    a = np.asarray(a, dtype=float)
    if lam == 0:
        return prox_orthant_smooth(a, y, g1, g2, r)
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    x = prox_orthant_smooth(a, y, g1, g2, r)
    keep = kept_indices(orthant_trimmed_scores(a, y, g1, g2, r, lam), K)
    x[keep] = prox_orthant_smooth(a + lam, y, g1, g2, r)[keep]
    return x


# ---------------------------------------------------------------------------
# PD cone


def prox_psd_smooth(A, Y, g1: float, g2: float, r: float) -> np.ndarray:
    """Minimizer over PD matrices of ``<A,X> + psd distance(X, Y)``.

    The minimizer shares eigenvectors with ``B = A + c Y^-1 - g2 Y``; each
    eigenvalue solves ``g2 x^2 + lambda_i x - c = 0``.

    Raises
    ------
    NumericError
        If the stationarity residual exceeds ``1e-8`` (relative).
    """
    A = np.asarray(A, dtype=float)
    Y = np.asarray(Y, dtype=float)
    A, Y = (A + A.T) / 2, (Y + Y.T) / 2
    lam_y, Qy = np.linalg.eigh(Y)
    if lam_y[0] <= 0:
        raise DomainError("centre must be positive definite")
    c = g1 * math.exp(r * float(np.sum(np.log(lam_y)))) if r else g1
    Yinv = (Qy / lam_y) @ Qy.T
    B = A + c * Yinv - g2 * Y
    lam_b, Q = np.linalg.eigh((B + B.T) / 2)
    xs = _positive_root(lam_b, c, g2)
    X = (Q * xs) @ Q.T
    X = (X + X.T) / 2
    Xinv = (Q / xs) @ Q.T
    resid = np.linalg.norm(A + c * (Yinv - Xinv) + g2 * (X - Y))
    scale = 1.0 + np.linalg.norm(A) + c * np.linalg.norm(Yinv) + g2 * np.linalg.norm(Y) + c * np.linalg.norm(Xinv)
    if not resid <= 1e-8 * scale:
        raise NumericError(f"PSD stationarity residual {resid:.3g}")
    return X


# ---------------------------------------------------------------------------
# second-order cone


def _soc_h(u, nb2, bn, g2, c):
    s = 2 * g2 * u + bn
    t = g2 * u + bn
    h = u - nb2 * u / s**2 - 2 * c / t
    dh = 1 - nb2 * (bn - 2 * g2 * u) / s**3 + 2 * c * g2 / t**2
    return h, dh


def soc_reduced_root(nb2: float, bn: float, g2: float, c: float, max_iter: int = 200) -> float:
    """Root of the scalar reduction for the Lorentz-cone subproblem.

    ``u`` is the last coordinate of the minimizer; the equation is
    ``u - |b_bar|^2 u / (2 g2 u + b_n)^2 - 2c / (g2 u + b_n) = 0`` on
    ``u > max(0, -b_n/g2)``, where the left side increases from negative
    values to ``+inf``. Safeguarded Newton with bisection.
    """
    lo = max(0.0, -bn / g2)
    step = max(1.0, abs(lo), abs(bn) / g2, math.sqrt(nb2) / g2, math.sqrt(c / g2))
    hi = lo + step
    for _ in range(2000):
        if _soc_h(hi, nb2, bn, g2, c)[0] > 0:
            break
        hi = lo + 2 * (hi - lo)
    else:
        raise NumericError("could not bracket the cone root")
    u = (lo + hi) / 2
    for _ in range(max_iter):
        h, dh = _soc_h(u, nb2, bn, g2, c)
        if h > 0:
            hi = u
        else:
            lo = u
        if h == 0 or hi - lo <= 4 * np.finfo(float).eps * hi:
            return u
        nxt = u - h / dh if dh > 0 else math.nan
        if not (lo < nxt < hi):
            nxt = (lo + hi) / 2
        if abs(nxt - u) <= 1e-16 * max(u, 1e-300):
            return nxt
        u = nxt
    raise NumericError("cone root iteration did not converge")


def prox_soc_smooth(a, y, g1: float, g2: float, r: float, max_iter: int = 200) -> np.ndarray:
    """Minimizer over the open Lorentz cone of ``<a,x> + soc distance(x, y)``.

    With ``b = a + 2c Jy/theta - g2 y`` the stationarity condition gives
    ``x_bar = -b_bar u / (2 g2 u + b_n)`` where ``u = x_n`` solves a scalar
    equation (:func:`soc_reduced_root`).

    Raises
    ------
    NumericError
        Root finding failed or the final residual exceeds ``1e-10`` (relative).
    """
    a = np.asarray(a, dtype=float)
    y = np.asarray(y, dtype=float)
    theta = _lorentz(y)
    if y[-1] <= 0 or theta <= 0:
        raise DomainError("centre must be interior to the Lorentz cone")
    c = g1 * theta**r
    b = a + 2 * c * _jmul(y) / theta - g2 * y
    bbar, bn = b[:-1], b[-1]
    u = soc_reduced_root(float(bbar @ bbar), float(bn), g2, c, max_iter)
    x = np.append(-bbar * u / (2 * g2 * u + bn), u)
    # <x, Jx> from the reduction; the direct form cancels near the boundary
    q = 2 * c * u / (g2 * u + bn)
    if not (x[-1] > 0 and q > 0):
        raise NumericError("cone solve left the interior")
    resid = np.linalg.norm(b - 2 * c * _jmul(x) / q + g2 * x)
    scale = 1.0 + np.linalg.norm(b) + g2 * np.linalg.norm(x) + 2 * c * np.linalg.norm(x) / q
    if not resid <= 1e-10 * scale:
        raise NumericError(f"cone stationarity residual {resid:.3g}")
    return x


# ---------------------------------------------------------------------------
# product distance for the trimmed logistic reformulation


def prox_de2_trimmed_logistic(a_x, a_z, y, w, gamma: float, g1: float, g2: float, lam: float, K: int):
    """Blockwise solution: soft threshold on ``x``, trimmed exponential on ``z``."""
    return (prox_sqnorm_l1(a_x, y, gamma * g2, lam), prox_exp_trimmed(a_z, w, gamma * g1, K))


# ---------------------------------------------------------------------------
# numeric fallback


def prox_generic(a: Point, y: Point, gamma: float, d: ProxGradDistance, g: Penalty,
                 seed: int = 0, starts: int = 20) -> Point:
    """Approximate subproblem minimizer from objective values alone.

    Separable problems are solved coordinate by coordinate with a global
    scalar search and exact enumeration of trimmed index sets; otherwise
    ``y`` plus ``starts`` random perturbations seed a Powell search that is
    polished by finite-difference Newton steps.

    Raises
    ------
    NumericError
        Every start lies outside the objective domain.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    sep = separable_parts(a, y, gamma, d, g)
    if sep is not None:
        coords, groups = sep
        t, _, _ = _numeric.separable_minimize(coords, groups)
        return y.like(t)
    param = _numeric.Param(y.space)

    def fn(v):
        try:
            return subproblem_value(a, y, gamma, d, g, param.to_point(v))
        except (DomainError, ValueError):
            return math.inf

    rng = np.random.default_rng(seed)
    v0 = param.to_params(y)
    scale = 0.1 * max(1.0, float(np.linalg.norm(v0)) / math.sqrt(v0.size))
    pts = [v0] + [v0 + scale * rng.standard_normal(v0.size) for _ in range(starts)]
    smooth = g.tag in ("zero", "indicator")
    v, _ = _numeric.multistart_minimize(fn, pts, smooth=smooth)
    return param.to_point(v)


def separable_parts(a: Point, y: Point, gamma: float, d: ProxGradDistance, g: Penalty):
    """Per-coordinate description of the subproblem, or ``None``."""
    groups = g.groups(y.space)
    if groups is None:
        return None
    terms = [d.coordinate_term(y, j) for j in range(y.space.size)]
    if any(t is None for t in terms):
        return None
    coords = [None] * y.space.size
    out_groups = []
    for grp in groups:
        idx = range(grp.index.start, grp.index.stop)
        for j in idx:
            aj, term, pen = a.data[j], terms[j], grp.coord

            def fn0(t, aj=aj, term=term, nonneg=grp.nonneg):
                val = aj * t + gamma * term(t)
                return np.where(np.asarray(t) < 0, np.inf, val) if nonneg else val

            if pen is None:
                fn1 = fn0
            else:
                def fn1(t, fn0=fn0, pen=pen):
                    return fn0(t) + pen(t)

            coords[j] = (fn0, fn1, float(y.data[j]), d.coordinate_lower(j), (0.0,))
        out_groups.append((list(idx), grp.K))
    return coords, out_groups


# ---------------------------------------------------------------------------
# pairing


def _is_tag(g: Penalty, *tags) -> bool:
    return g.tag in tags


def pair_prox(d: ProxGradDistance, g: Penalty, fallback: bool = True) -> Callable[[Point, Point, float], ProxResult]:
    """Subproblem solver for ``(d, g)`` with multiplier ``gamma = beta^i``.

    The returned callable maps ``(a, y, gamma)`` to a :class:`ProxResult`.
    Pairs without a closed form use :func:`prox_generic`; closed forms that
    raise :class:`NumericError` fall back to it when ``fallback`` is set.
    """
    closed = _closed_form(d, g)

    def generic(a, y, gamma):
        return ProxResult(prox_generic(a, y, gamma, d, g), approximate=True)

    if closed is None:
        return generic

    def solve(a, y, gamma):
        try:
            return ProxResult(y.like(closed(a, y, gamma)))
        except NumericError:
            if not fallback:
                raise
            return generic(a, y, gamma)

    return solve


def _closed_form(d: ProxGradDistance, g: Penalty):
    if isinstance(d, SqNormDistance):
        if _is_tag(g, "zero"):
            return lambda a, y, gm: y.data - a.data / gm
        if _is_tag(g, "l1"):
            return lambda a, y, gm: prox_sqnorm_l1(a.data, y.data, gm, g.lam)
        return None
    if isinstance(d, MetricDistance):
        H = d.H
        if _is_tag(g, "zero"):
            return lambda a, y, gm: y.data - np.linalg.solve(H, a.data) / gm
        if _is_tag(g, "l1") and d.diagonal:
            h = np.diag(H)
            return lambda a, y, gm: prox_sqnorm_l1(a.data / h, y.data, gm, g.lam / h)
        return None
    if isinstance(d, ExpDistance):
        if _is_tag(g, "zero"):
            return lambda a, y, gm: prox_exp_trimmed(a.data, y.data, gm * d.gamma1, y.space.size)
        if _is_tag(g, "trimmed_exp"):
            return lambda a, y, gm: prox_exp_trimmed(a.data, y.data, gm * d.gamma1, g.K)
        return None
    if isinstance(d, De2Distance):
        if not isinstance(g, BlockPenalty) or len(g.parts) != 2:
            return None
        gx, gz = g.parts
        if isinstance(gx, ZeroPenalty):
            lam = 0.0
        elif isinstance(gx, L1Penalty):
            lam = gx.lam
        else:
            return None
        if isinstance(gz, ZeroPenalty):
            K = None
        elif isinstance(gz, TrimmedExpPenalty):
            K = gz.K
        else:
            return None

        def de2(a, y, gm):
            sx, sz = y.space.block_slices()
            kk = (sz.stop - sz.start) if K is None else K
            x, z = prox_de2_trimmed_logistic(a.data[sx], a.data[sz], y.data[sx], y.data[sz],
                                             gm, d.gamma1, d.gamma2, lam, kk)
            return np.concatenate([x, z])

        return de2
    if isinstance(d, OrthantDistance):
        g1, g2, r = d.gamma1, d.gamma2, d.r
        if _is_tag(g, "zero") or (isinstance(g, ConeIndicator) and g.cone == "orthant"):
            return lambda a, y, gm: prox_orthant_smooth(a.data, y.data, gm * g1, gm * g2, r)
        if _is_tag(g, "l1"):
            return lambda a, y, gm: prox_orthant_smooth(a.data + g.lam, y.data, gm * g1, gm * g2, r)
        if _is_tag(g, "trimmed_l1"):
            return lambda a, y, gm: prox_orthant_trimmed_l1(a.data, y.data, gm * g1, gm * g2, r, g.lam, g.K)
        return None
    if isinstance(d, PSDDistance):
        if _is_tag(g, "zero") or (isinstance(g, ConeIndicator) and g.cone == "psd"):
            return lambda a, y, gm: prox_psd_smooth(a.array, y.array, gm * d.gamma1, gm * d.gamma2, d.r).reshape(-1)
        return None
    if isinstance(d, SOCDistance):
        if _is_tag(g, "zero") or (isinstance(g, ConeIndicator) and g.cone == "soc"):
            return lambda a, y, gm: prox_soc_smooth(a.data, y.data, gm * d.gamma1, gm * d.gamma2, d.r)
        return None
    return None
