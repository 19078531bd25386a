"""Independent ground truth: brute-force subproblem minimization, finite
differences, empirical convergence-rate classification and randomized
closed-form cross-checks.

Nothing in this module calls the closed-form solvers except
:func:`crosscheck`, which compares them against :func:`brute_force_prox`.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import _numeric
from .core import Point, Space, Trace
from .distances import (
    ExpDistance,
    OrthantDistance,
    ProxGradDistance,
    PSDDistance,
    SOCDistance,
    SqNormDistance,
)
from .errors import ConfigError, DomainError, NumericError
from .penalties import (
    L1Penalty,
    Penalty,
    TrimmedExpPenalty,
    TrimmedL1Penalty,
    ZeroPenalty,
)
from .prox import pair_prox, separable_parts, subproblem_value

__all__ = [
    "OracleResult",
    "brute_force_prox",
    "finite_diff_grad",
    "RateEstimate",
    "estimate_rate",
    "estimate_rate_from_gaps",
    "CROSSCHECK_FAMILIES",
    "make_instance",
    "InstanceResult",
    "CrosscheckReport",
    "crosscheck",
]


# ---------------------------------------------------------------------------
# brute-force subproblem minimization


@dataclass(frozen=True)
class OracleResult:
    x: Point
    value: float
    unique: bool = True
    exhausted: bool = False


def brute_force_prox(a: Point, y: Point, gamma: float, d: ProxGradDistance, g: Penalty,
                     budget: int = 200_000, starts: int = 3, seed: int = 0) -> OracleResult:
    """Minimize ``<a,x> + gamma D(x,y) + g(x)`` from objective values only.

    Separable instances get a global scalar search per coordinate and, for
    trimmed penalties, an explicit enumeration of every kept index set.
    Other instances are solved by damped Newton steps with finite-difference
    derivatives from ``y`` and ``starts - 1`` random perturbations.

    Parameters
    ----------
    budget : int
        Cap on objective evaluations in the non-separable path; hitting it
        sets ``exhausted`` and returns the best point found.
    """
    sep = separable_parts(a, y, gamma, d, g)
    if sep is not None:
        coords, groups = sep
        t, _, unique = _numeric.separable_minimize(coords, groups)
        x = y.like(t)
        return OracleResult(x, subproblem_value(a, y, gamma, d, g, x), unique)

    param = _numeric.Param(y.space)
    count = [0]

    def fn(v):
        count[0] += 1
        if count[0] > budget:
            raise _Budget
        try:
            return subproblem_value(a, y, gamma, d, g, param.to_point(v))
        except (DomainError, ValueError):
            return math.inf

    rng = np.random.default_rng(seed)
    v0 = param.to_params(y)
    scale = 0.05 * max(1.0, float(np.linalg.norm(v0)) / math.sqrt(v0.size))
    best_v, best_f, exhausted = v0, fn(v0), False
    for k in range(starts):
        s = v0 if k == 0 else v0 + scale * rng.standard_normal(v0.size)
        try:
            v, f = _numeric.newton_polish(fn, s, iters=60, gtol=1e-12)
        except _Budget:
            exhausted = True
            break
        if f < best_f:
            best_v, best_f = v, f
    x = param.to_point(best_v)
    return OracleResult(x, subproblem_value(a, y, gamma, d, g, x), True, exhausted)


class _Budget(Exception):
    pass


# ---------------------------------------------------------------------------
# finite differences


def finite_diff_grad(fn: Callable[[Point], float], x: Point, rel_step: float = 1e-6) -> Point:
    """Central-difference gradient with step ``rel_step * max(1, |x_j|)``.

    Symmetric coordinates are perturbed symmetrically, so the result is the
    gradient with respect to the Frobenius inner product. If a stencil point
    leaves the domain (non-finite value) the step is halved, up to 3 times.

    Raises
    ------
    DomainError
        The stencil is still outside the domain after shrinking.
    """
    flat = x.data
    n = flat.size
    grad = np.zeros(n)
    sym = _sym_partner(x.space)
    done = np.zeros(n, dtype=bool)
    for j in range(n):
        if done[j]:
            continue
        partner = sym[j]
        h = rel_step * max(1.0, abs(flat[j]))
        for _ in range(4):
            e = np.zeros(n)
            if partner != j:
                e[j] = e[partner] = h / 2
            else:
                e[j] = h
            fp, fm = fn(x.like(flat + e)), fn(x.like(flat - e))
            if math.isfinite(fp) and math.isfinite(fm):
                break
            h /= 2
        else:
            raise DomainError(f"finite-difference stencil leaves the domain at coordinate {j}")
        grad[j] = (fp - fm) / (2 * h)
        if partner != j:
            grad[partner] = grad[j]
            done[partner] = True
        done[j] = True
    return x.like(grad)


def _sym_partner(space: Space) -> np.ndarray:
    """Index of the mirrored entry for symmetric storage, identity elsewhere."""
    idx = np.arange(space.size)
    blocks = space.blocks if space.kind == "product" else (space,)
    slices = space.block_slices() if space.kind == "product" else [slice(0, space.size)]
    for b, sl in zip(blocks, slices):
        if b.kind == "symmetric":
            n = b.shape[0]
            local = np.arange(n * n).reshape(n, n).T.reshape(-1)
            idx[sl] = sl.start + local
    return idx


# ---------------------------------------------------------------------------
# convergence-rate classification


@dataclass(frozen=True)
class RateEstimate:
    """Empirical regime of ``R_k = F(x^k) - F*``.

    ``regime`` is one of ``finite_steps``, ``superlinear``, ``linear``,
    ``sublinear`` or ``inconclusive``. ``diagnostics`` is the RMS residual
    of the chosen log-fit (``nan`` when no fit applies).
    """

    regime: str
    fitted_theta: Optional[float] = None
    linear_ratio: Optional[float] = None
    fit_window: int = 0
    diagnostics: float = math.nan
    note: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def _rms_fit(t, logR):
    """Slope and RMS residual relative to the spread of ``log R`` (``sqrt(1 - R^2)``)."""
    slope, icept = np.polyfit(t, logR, 1)
    resid = logR - (slope * t + icept)
    spread = float(np.std(logR))
    if spread == 0:
        return float(slope), math.inf
    return float(slope), float(np.sqrt(np.mean(resid**2))) / spread


def estimate_rate_from_gaps(R: Sequence[float], ks: Optional[Sequence[float]] = None,
                            floor: float = 0.0, fit_tol: float = 0.05, min_points: int = 10) -> RateEstimate:
    """Classify a gap sequence.

    Gaps at or below ``floor`` end the usable series (noise). Among the
    usable gaps the last half forms the fit window. Order of tests:
    exact zero (finite), strictly shrinking ratios (superlinear), then the
    better of an affine fit of ``log R`` against ``k`` (linear) and
    against ``log k`` (sublinear), accepted if its RMS residual, relative
    to the standard deviation of ``log R`` over the window, is at most
    ``fit_tol``. Multiplying ``R`` and ``floor`` by a constant changes
    nothing but the fitted intercepts.
    """
    R = np.asarray(R, dtype=float)
    ks = np.arange(R.size, dtype=float) if ks is None else np.asarray(ks, dtype=float)
    if np.any(R < -floor):
        return RateEstimate("inconclusive", note="negative gap; F* estimate too high")
    low = np.nonzero(R <= floor)[0]
    usable = int(low[0]) if low.size else R.size
    if low.size and np.all(R[usable:] == 0):
        # an exact hit, not a gradual slide into the noise floor
        return RateEstimate("finite_steps", fit_window=usable, note=f"gap reached zero at k={int(ks[usable])}")
    if usable < min_points:
        return RateEstimate("inconclusive", fit_window=usable, note="too few gaps above the noise floor")
    start = usable // 2
    t, r = ks[start:usable], R[start:usable]
    logR = np.log(r)
    ratios = r[1:] / r[:-1]
    if ratios.size >= 3 and np.all(np.diff(ratios) < 0) and ratios[-1] <= 0.1 * ratios[0]:
        return RateEstimate("superlinear", fit_window=t.size, note="successive ratios decrease to zero")
    lin_slope, lin_res = _rms_fit(t, logR)
    sub_slope, sub_res = (math.nan, math.inf)
    if np.all(t > 0):
        sub_slope, sub_res = _rms_fit(np.log(t), logR)
    if lin_res <= fit_tol and lin_res <= sub_res and lin_slope < 0:
        return RateEstimate("linear", linear_ratio=math.exp(lin_slope), fit_window=t.size, diagnostics=lin_res)
    if sub_res <= fit_tol and sub_slope < 0:
        theta = 0.5 * (1 + 1 / sub_slope)
        theta = theta if 0 < theta <= 1 else None
        return RateEstimate("sublinear", fitted_theta=theta, fit_window=t.size, diagnostics=sub_res)
    return RateEstimate("inconclusive", fit_window=t.size, diagnostics=min(lin_res, sub_res),
                        note="neither log-linear nor log-log fit is tight")


def estimate_rate(trace: Trace, F_star_hint: Optional[float] = None, tol_step: float = 1e-10) -> RateEstimate:
    """Rate regime of ``F(x^k)`` along a solver trace.

    Without ``F_star_hint`` the final value minus ``tol_step`` stands in for
    the limit. Gaps within a few hundred ulps of ``F*`` count as noise.
    """
    F = trace.F_values
    if F.size < 30:
        return RateEstimate("inconclusive", note="fewer than 30 recorded values")
    F_star = F[-1] - tol_step if F_star_hint is None else float(F_star_hint)
    floor = 256 * np.finfo(float).eps * max(1.0, abs(F_star))
    return estimate_rate_from_gaps(F - F_star, floor=floor)


# ---------------------------------------------------------------------------
# randomized cross-checks of the closed-form solvers


def _spd(rng, n, lo=0.3, hi=2.0):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return (Q * rng.uniform(lo, hi, n)) @ Q.T


def _soc_interior(rng, n):
    bar = rng.standard_normal(n - 1)
    return np.append(bar, np.linalg.norm(bar) + rng.uniform(0.2, 1.5))


def make_instance(family: str, rng: np.random.Generator, n: Optional[int] = None):
    """Random subproblem ``(a, y, gamma, d, g)`` for a named family."""
    gamma = float(rng.uniform(0.3, 3.0))
    if family == "sqnorm_l1":
        n = n or int(rng.integers(1, 7))
        y = Point.vector(rng.normal(size=n))
        return Point.vector(rng.normal(size=n)), y, gamma, SqNormDistance(), L1Penalty(float(rng.uniform(0, 1.5)))
    if family == "trimmed_exp":
        n = n or int(rng.integers(1, 7))
        K = int(rng.integers(0, n + 1))
        d = ExpDistance(float(rng.uniform(0.5, 2.0)))
        return (Point.vector(rng.normal(size=n)), Point.vector(rng.normal(size=n)), gamma, d, TrimmedExpPenalty(K))
    if family in ("orthant_smooth", "orthant_trimmed_l1"):
        n = n or int(rng.integers(1, 7))
        r = float(rng.choice([0.0, 1.0, 2.0]))
        d = OrthantDistance(float(rng.uniform(0.5, 2.0)), float(rng.uniform(0.5, 2.0)), r)
        y = Point.vector(rng.uniform(0.3, 2.0, n))
        a = Point.vector(rng.normal(size=n))
        if family == "orthant_smooth":
            return a, y, gamma, d, ZeroPenalty()
        K = int(rng.integers(0, n + 1))
        return a, y, gamma, d, TrimmedL1Penalty(float(rng.uniform(0.1, 1.5)), K)
    if family == "psd_smooth":
        n = n or int(rng.integers(2, 5))
        r = float(rng.choice([0.0, 1.0, 2.0]))
        d = PSDDistance(float(rng.uniform(0.5, 2.0)), float(rng.uniform(0.5, 2.0)), r)
        A = rng.normal(size=(n, n))
        return Point.symmetric(A), Point.symmetric(_spd(rng, n)), gamma, d, ZeroPenalty()
    if family == "soc_smooth":
        n = n or int(rng.integers(2, 5))
        r = float(rng.choice([0.0, 1.0, 2.0]))
        d = SOCDistance(float(rng.uniform(0.5, 2.0)), float(rng.uniform(0.5, 2.0)), r)
        return Point.vector(rng.normal(size=n)), Point.vector(_soc_interior(rng, n)), gamma, d, ZeroPenalty()
    raise ConfigError(f"unknown cross-check family {family!r}")


CROSSCHECK_FAMILIES = ("sqnorm_l1", "trimmed_exp", "orthant_smooth", "orthant_trimmed_l1", "psd_smooth", "soc_smooth")


@dataclass
class InstanceResult:
    seed: list
    closed_value: float
    oracle_value: float
    value_gap: float
    arg_gap: float
    unique: bool
    exhausted: bool
    passed: bool
    error: str = ""


@dataclass
class CrosscheckReport:
    family: str
    count: int
    value_tol: float
    arg_tol: float
    instances: list[InstanceResult] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def max_value_gap(self) -> float:
        return max((i.value_gap for i in self.instances), default=0.0)

    @property
    def max_arg_gap(self) -> float:
        return max((i.arg_gap for i in self.instances if i.unique), default=0.0)

    @property
    def failures(self) -> list[InstanceResult]:
        return [i for i in self.instances if not i.passed]

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "count": self.count,
            "value_tol": self.value_tol,
            "arg_tol": self.arg_tol,
            "max_value_gap": self.max_value_gap,
            "max_arg_gap": self.max_arg_gap,
            "passed": self.passed,
            "failures": [asdict(f) for f in self.failures],
        }


def crosscheck(family: str, count: int, seed: int = 0, n: Optional[int] = None,
               value_tol: float = 1e-7, arg_tol: float = 1e-6, fallback: bool = False) -> CrosscheckReport:
    """Compare a closed-form solver with :func:`brute_force_prox` on random instances.

    Instance ``i`` is drawn from ``default_rng([seed, i])`` so any failure
    can be replayed alone. Objective values must agree within ``value_tol``
    in both directions; arguments must agree within ``arg_tol`` whenever
    the oracle reports a unique minimizer.
    """
    report = CrosscheckReport(family, count, value_tol, arg_tol)
    t0 = time.perf_counter()
    for i in range(count):
        rng = np.random.default_rng([seed, i])
        a, y, gamma, d, g = make_instance(family, rng, n)
        try:
            res = pair_prox(d, g, fallback=fallback)(a, y, gamma)
            fc = subproblem_value(a, y, gamma, d, g, res.x)
            orc = brute_force_prox(a, y, gamma, d, g, seed=i)
        except (NumericError, DomainError) as exc:
            report.instances.append(InstanceResult([seed, i], math.nan, math.nan, math.inf, math.inf,
                                                   False, False, False, f"{type(exc).__name__}: {exc}"))
            continue
        vgap = abs(fc - orc.value)
        agap = float(np.max(np.abs(res.x.data - orc.x.data)))
        ok = vgap <= value_tol and (agap <= arg_tol or not orc.unique) and not orc.exhausted
        report.instances.append(InstanceResult([seed, i], fc, orc.value, vgap, agap, orc.unique, orc.exhausted, ok))
    report.seconds = time.perf_counter() - t0
    return report
