"""Prox-grad distances ``D(x, y)`` and their assumption certificates.

Each distance acts on the flat storage of a :class:`~gvdpgm.core.Point`
together with a centre ``y`` taken from an open convex set ``C``:

========== ========================== =======================================
family     domain ``C``               value
========== ========================== =======================================
sqnorm     whole space                ``1/2 ||x - y||^2``
metric     whole space                ``1/2 <x - y, H (x - y)>``
exp        whole space                ``g1 * sum(cosh(z - w) - 1)``
de2        whole product space        ``g1 * D_exp(z, w) + g2/2 ||x - y||^2``
orthant    positive orthant           weighted log-barrier + quadratic
psd        PD cone                    log-det barrier + quadratic
soc        interior of Lorentz cone   log barrier on ``<x, Jx>`` + quadratic
========== ========================== =======================================

Value functions return ``inf`` outside ``C`` (cone barriers); gradients
raise :class:`DomainError` there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .core import Point, Space
from .errors import ConfigError, DomainError, SpaceMismatchError

__all__ = [
    "psi",
    "psi_prime",
    "sqnorm_value",
    "metric_value",
    "exp_distance_value",
    "de2_value",
    "orthant_value",
    "psd_value",
    "soc_value",
    "distance_grad_x",
    "DistanceCertificate",
    "ProxGradDistance",
    "SqNormDistance",
    "MetricDistance",
    "ExpDistance",
    "De2Distance",
    "OrthantDistance",
    "PSDDistance",
    "SOCDistance",
    "SampleSpec",
    "CheckResult",
    "CertificateReport",
    "validate_certificate",
]

_CLAMP = 700.0
_EIG_FLOOR = 1e-300


# ---------------------------------------------------------------------------
# scalar kernels


def psi(xi):
    """``cosh(xi) - 1`` computed as ``2 sinh(xi/2)^2`` (no cancellation near 0)."""
    xi = np.clip(np.asarray(xi, dtype=float), -_CLAMP, _CLAMP)
    return 2.0 * np.sinh(xi / 2) ** 2


def psi_prime(xi):
    xi = np.clip(np.asarray(xi, dtype=float), -_CLAMP, _CLAMP)
    return np.sinh(xi)


def _ratio_barrier(t):
    """``t - 1 - log t`` for positive ``t``; ``log1p`` form near ``t = 1``."""
    t = np.asarray(t, dtype=float)
    u = t - 1
    near = np.abs(u) < 0.5
    out = np.where(near, u - np.log1p(np.where(near, u, 0.0)), u - np.log(np.where(near, 1.0, t)))
    return np.maximum(out, 0.0)


def _rel_barrier(x, y):
    """``-log(x/y) + x/y - 1`` for positive arrays."""
    return _ratio_barrier(x / y)


def _lorentz(v):
    """``<v, Jv> = v_n^2 - ||v_bar||^2`` in factored form."""
    nb = np.linalg.norm(v[:-1])
    return (v[-1] - nb) * (v[-1] + nb)


def _jmul(v):
    out = -np.asarray(v, dtype=float).copy()
    out[-1] = -out[-1]
    return out


def _pd_eigs(M, what):
    lam, Q = np.linalg.eigh((M + M.T) / 2)
    if lam[0] <= _EIG_FLOOR:
        raise DomainError(f"{what} is not positive definite (min eigenvalue {lam[0]:.3g})")
    return lam, Q


# ---------------------------------------------------------------------------
# certificates


@dataclass(frozen=True)
class DistanceCertificate:
    """Declared assumption constants of a distance.

    Parameters
    ----------
    error_bound : (alpha', nu), optional
        ``alpha' ||x - y||^(1+nu) <= D(x, y)``.
    inverse_bound : (L', nu'), optional
        ``D(x, y) <= L' ||x - y||^(1+nu')``.
    grad_lipschitz : float, optional
        ``||grad_x D(x, y)|| <= L'' ||x - y||``.
    radius : float, optional
        Constants are claimed only for ``||x - y|| <= radius``.
    scope : {"global", "local"}
        ``local`` constants were derived for a specific region of ``C``
        (the one the validator samples); ``global`` claims all of ``C``.
    """

    lower_quadratic: bool = True
    error_bound: Optional[tuple[float, float]] = None
    inverse_bound: Optional[tuple[float, float]] = None
    grad_lipschitz: Optional[float] = None
    argmin_interior: bool = True
    radius: Optional[float] = None
    scope: str = "global"

    @property
    def satisfies_local_error_bound(self) -> bool:
        return self.error_bound is not None

    @property
    def satisfies_inverse_bound(self) -> bool:
        return self.inverse_bound is not None

    @property
    def satisfies_grad_lipschitz_like(self) -> bool:
        return self.grad_lipschitz is not None


# ---------------------------------------------------------------------------
# distance objects


class ProxGradDistance:
    """Base class. Subclasses implement ``_value`` / ``_grad`` on flat arrays."""

    family = "abstract"
    domain_tag = "whole"

    def __init__(self):
        self.certificate = self._default_certificate()

    # --- domain --------------------------------------------------------
    def supports(self, space: Space) -> bool:
        return True

    def interior_margin(self, x: Point) -> float:
        """Positive iff ``x`` is interior to ``C`` (``inf`` for the whole space)."""
        return math.inf

    def contains(self, x: Point) -> bool:
        return self.interior_margin(x) > 0

    def _check_pair(self, x: Point, y: Point):
        if x.space != y.space:
            raise SpaceMismatchError(f"distance between {x.space} and {y.space}")
        if not self.supports(x.space):
            raise SpaceMismatchError(f"{self.family} distance does not act on {x.space}")
        if not self.contains(y):
            raise DomainError(f"centre is not interior to the {self.domain_tag} domain")

    # --- evaluation ----------------------------------------------------
    def value(self, x: Point, y: Point) -> float:
        self._check_pair(x, y)
        return float(self._value(x, y))

    def grad_x(self, x: Point, y: Point) -> Point:
        self._check_pair(x, y)
        if not self.contains(x):
            raise DomainError(f"gradient requested outside the {self.domain_tag} interior")
        return x.like(self._grad(x, y))

    def __call__(self, x: Point, y: Point) -> float:
        return self.value(x, y)

    def _value(self, x, y):
        raise NotImplementedError

    def _grad(self, x, y):
        raise NotImplementedError

    # --- oracle hooks --------------------------------------------------
    def coordinate_term(self, y: Point, j: int) -> Optional[Callable[[np.ndarray], np.ndarray]]:
        """Scalar function ``t -> D_j(t, y_j)`` if ``D`` is separable, else ``None``."""
        return None

    def coordinate_lower(self, j: int) -> float:
        """Open lower end of the coordinate domain (``-inf`` or ``0``)."""
        return -math.inf

    def sample_direction(self, rng: np.random.Generator, space: Space) -> np.ndarray:
        """Unit direction ``u`` with ``y + s u`` in ``C`` for every ``s > 0``."""
        u = rng.standard_normal(space.size)
        return u / np.linalg.norm(u)

    def local_certificate(self, center: Point, radius: float) -> DistanceCertificate:
        return self.certificate

    def _default_certificate(self) -> DistanceCertificate:
        return DistanceCertificate()

    @property
    def params(self) -> dict:
        return {}

    def __repr__(self):
        args = ", ".join(f"{k}={v}" for k, v in self.params.items() if np.isscalar(v))
        return f"{type(self).__name__}({args})"


class SqNormDistance(ProxGradDistance):
    family = "sqnorm"

    def _value(self, x, y):
        d = x.data - y.data
        return 0.5 * float(np.dot(d, d))

    def _grad(self, x, y):
        return x.data - y.data

    def coordinate_term(self, y, j):
        yj = y.data[j]
        return lambda t: 0.5 * (t - yj) ** 2

    def _default_certificate(self):
        return DistanceCertificate(error_bound=(0.5, 1.0), inverse_bound=(0.5, 1.0), grad_lipschitz=1.0)


class MetricDistance(ProxGradDistance):
    """``1/2 <x - y, H (x - y)>`` for a symmetric positive definite ``H``.

    ``H`` acts on the flat storage, so it must be ``size x size``.
    """

    family = "metric"

    def __init__(self, H):
        H = np.atleast_2d(np.asarray(H, dtype=float))
        if H.shape[0] != H.shape[1]:
            raise ConfigError(f"metric operator must be square, got {H.shape}")
        if not np.allclose(H, H.T, rtol=0, atol=1e-12 * max(1.0, np.abs(H).max())):
            raise ConfigError("metric operator must be symmetric")
        H = (H + H.T) / 2
        lam = np.linalg.eigvalsh(H)
        if lam[0] <= 0:
            raise ConfigError(f"metric operator is not positive definite (min eigenvalue {lam[0]:.3g})")
        self.H = H
        self.lam_min, self.lam_max = float(lam[0]), float(lam[-1])
        self.diagonal = bool(np.count_nonzero(H - np.diag(np.diag(H))) == 0)
        super().__init__()

    def supports(self, space):
        return space.size == self.H.shape[0]

    def _value(self, x, y):
        d = x.data - y.data
        return 0.5 * float(d @ self.H @ d)

    def _grad(self, x, y):
        return self.H @ (x.data - y.data)

    def coordinate_term(self, y, j):
        if not self.diagonal:
            return None
        h, yj = self.H[j, j], y.data[j]
        return lambda t: 0.5 * h * (t - yj) ** 2

    def _default_certificate(self):
        return DistanceCertificate(
            error_bound=(self.lam_min / 2, 1.0),
            inverse_bound=(self.lam_max / 2, 1.0),
            grad_lipschitz=self.lam_max,
        )

    @property
    def params(self):
        return {"H": self.H}


class ExpDistance(ProxGradDistance):
    family = "exp"

    def __init__(self, gamma1: float = 1.0, L_tilde: float = math.cosh(1.0)):
        if not gamma1 > 0:
            raise ConfigError("gamma1 must be positive")
        if not L_tilde > 1:
            raise ConfigError("L_tilde must exceed 1")
        self.gamma1, self.L_tilde = float(gamma1), float(L_tilde)
        super().__init__()

    def _value(self, x, y):
        return self.gamma1 * float(np.sum(psi(x.data - y.data)))

    def _grad(self, x, y):
        return self.gamma1 * psi_prime(x.data - y.data)

    def coordinate_term(self, y, j):
        g1, yj = self.gamma1, y.data[j]
        return lambda t: g1 * psi(t - yj)

    def _default_certificate(self):
        g1, L = self.gamma1, self.L_tilde
        return DistanceCertificate(
            error_bound=(g1 / 2, 1.0),
            inverse_bound=(g1 * L / 2, 1.0),
            grad_lipschitz=g1 * L,
            radius=math.acosh(L),
        )

    @property
    def params(self):
        return {"gamma1": self.gamma1}


class De2Distance(ProxGradDistance):
    """``g1 * D_exp(z, w) + g2/2 ||x - y||^2`` on ``product(x-block, z-block)``."""

    family = "de2"

    def __init__(self, gamma1: float = 1.0, gamma2: float = 1.0, L_tilde: float = math.cosh(1.0)):
        if not (gamma1 > 0 and gamma2 > 0):
            raise ConfigError("gamma1 and gamma2 must be positive")
        if not L_tilde > 1:
            raise ConfigError("L_tilde must exceed 1")
        self.gamma1, self.gamma2, self.L_tilde = float(gamma1), float(gamma2), float(L_tilde)
        super().__init__()

    def supports(self, space):
        return space.kind == "product" and len(space.blocks) == 2

    def _split(self, p: Point):
        sx, sz = p.space.block_slices()
        return p.data[sx], p.data[sz]

    def _value(self, x, y):
        xx, xz = self._split(x)
        yx, yz = self._split(y)
        d = xx - yx
        return self.gamma1 * float(np.sum(psi(xz - yz))) + 0.5 * self.gamma2 * float(np.dot(d, d))

    def _grad(self, x, y):
        xx, xz = self._split(x)
        yx, yz = self._split(y)
        return np.concatenate([self.gamma2 * (xx - yx), self.gamma1 * psi_prime(xz - yz)])

    def coordinate_term(self, y, j):
        n_x = y.space.blocks[0].size
        yj = y.data[j]
        if j < n_x:
            g2 = self.gamma2
            return lambda t: 0.5 * g2 * (t - yj) ** 2
        g1 = self.gamma1
        return lambda t: g1 * psi(t - yj)

    def _default_certificate(self):
        g1, g2, L = self.gamma1, self.gamma2, self.L_tilde
        top = max(g1 * L, g2)
        return DistanceCertificate(
            error_bound=(min(g1, g2) / 2, 1.0),
            inverse_bound=(top / 2, 1.0),
            grad_lipschitz=top,
            radius=math.acosh(L),
        )

    @property
    def params(self):
        return {"gamma1": self.gamma1, "gamma2": self.gamma2}


class _ConeDistance(ProxGradDistance):
    """Shared parameter handling for the barrier families."""

    def __init__(self, gamma1: float = 1.0, gamma2: float = 1.0, r: float = 0.0):
        if not (gamma1 > 0 and gamma2 > 0):
            raise ConfigError("gamma1 and gamma2 must be positive")
        if not r >= 0:
            raise ConfigError("r must be nonnegative")
        self.gamma1, self.gamma2, self.r = float(gamma1), float(gamma2), float(r)
        super().__init__()

    def _default_certificate(self):
        return DistanceCertificate(error_bound=(min(self.gamma1, self.gamma2) / 2, 1.0))

    def _local(self, weight_max, curvature_max, radius):
        L2 = self.gamma1 * weight_max * curvature_max + self.gamma2
        return DistanceCertificate(
            error_bound=(min(self.gamma1, self.gamma2) / 2, 1.0),
            inverse_bound=(L2 / 2, 1.0),
            grad_lipschitz=L2,
            radius=2 * radius,
            scope="local",
        )

    @property
    def params(self):
        return {"gamma1": self.gamma1, "gamma2": self.gamma2, "r": self.r}


class OrthantDistance(_ConeDistance):
    """``g1 sum y_j^r (-log(x_j/y_j) + x_j/y_j - 1) + g2/2 ||x - y||^2`` entrywise."""

    family = "orthant"
    domain_tag = "orthant"

    def interior_margin(self, x):
        return float(np.min(x.data))

    def _value(self, x, y):
        xv, yv = x.data, y.data
        if np.any(xv <= 0):
            return math.inf
        d = xv - yv
        return self.gamma1 * float(np.sum(yv**self.r * _rel_barrier(xv, yv))) + 0.5 * self.gamma2 * float(np.dot(d, d))

    def _grad(self, x, y):
        xv, yv = x.data, y.data
        return self.gamma1 * yv**self.r * (1 / yv - 1 / xv) + self.gamma2 * (xv - yv)

    def coordinate_term(self, y, j):
        g1, g2, yj = self.gamma1, self.gamma2, y.data[j]
        w = yj**self.r

        def term(t):
            t = np.asarray(t, dtype=float)
            safe = np.where(t > 0, t, 1.0)
            out = g1 * w * _rel_barrier(safe, yj) + 0.5 * g2 * (t - yj) ** 2
            return np.where(t > 0, out, np.inf)

        return term

    def coordinate_lower(self, j):
        return 0.0

    def sample_direction(self, rng, space):
        u = rng.uniform(0.1, 1.0, space.size)
        return u / np.linalg.norm(u)

    def local_certificate(self, center, radius):
        lo = float(np.min(center.data)) - radius
        hi = float(np.max(center.data)) + radius
        if lo <= 0:
            raise DomainError("sampling ball leaves the positive orthant")
        return self._local(hi**self.r, 1 / lo**2, radius)


class PSDDistance(_ConeDistance):
    """Log-det barrier distance on symmetric matrices."""

    family = "psd"
    domain_tag = "psd"

    def supports(self, space):
        return space.kind == "symmetric"

    def interior_margin(self, x):
        return float(np.linalg.eigvalsh(x.array)[0])

    def _weight(self, lam_y):
        return math.exp(self.r * float(np.sum(np.log(lam_y)))) if self.r else 1.0

    def _value(self, x, y):
        X, Y = x.array, y.array
        if np.linalg.eigvalsh(X)[0] <= _EIG_FLOOR:
            return math.inf
        if np.array_equal(X, Y):
            return 0.0
        lam_y, _ = _pd_eigs(Y, "centre")
        mu = scipy.linalg.eigh(X, Y, eigvals_only=True)
        barrier = float(np.sum(_ratio_barrier(mu)))
        return self.gamma1 * self._weight(lam_y) * barrier + 0.5 * self.gamma2 * float(np.sum((X - Y) ** 2))

    def _grad(self, x, y):
        X, Y = x.array, y.array
        lam_x, Qx = _pd_eigs(X, "point")
        lam_y, Qy = _pd_eigs(Y, "centre")
        Xinv = (Qx / lam_x) @ Qx.T
        Yinv = (Qy / lam_y) @ Qy.T
        G = self.gamma1 * self._weight(lam_y) * (Yinv - Xinv) + self.gamma2 * (X - Y)
        return G.reshape(-1)

    def sample_direction(self, rng, space):
        n = space.shape[0]
        A = rng.standard_normal((n, n))
        U = A @ A.T + 0.1 * np.eye(n)
        return (U / np.linalg.norm(U)).reshape(-1)

    def local_certificate(self, center, radius):
        lam = np.linalg.eigvalsh(center.array)
        lo, hi = lam[0] - radius, lam[-1] + radius
        if lo <= 0:
            raise DomainError("sampling ball leaves the PD cone")
        n = lam.size
        return self._local(hi ** (n * self.r), 1 / lo**2, radius)


class SOCDistance(_ConeDistance):
    """Log barrier on ``<x, Jx>`` with ``J = diag(-1, ..., -1, 1)``."""

    family = "soc"
    domain_tag = "soc"

    def supports(self, space):
        return space.kind == "vector" and space.size >= 2

    def interior_margin(self, x):
        v = x.data
        return float(min(v[-1], _lorentz(v)))

    def _value(self, x, y):
        xv, yv = x.data, y.data
        qx = _lorentz(xv)
        if xv[-1] <= 0 or qx <= 0:
            return math.inf
        qy = _lorentz(yv)
        d = xv - yv
        # -log(qx/qy) + 2<x,Jy>/qy - 2 rewritten with u = x - y; exact at x = y
        barrier = max(float(_ratio_barrier(qx / qy)) - float(np.dot(d, _jmul(d))) / qy, 0.0)
        return self.gamma1 * qy**self.r * barrier + 0.5 * self.gamma2 * float(np.dot(d, d))

    def _grad(self, x, y):
        xv, yv = x.data, y.data
        qx, qy = _lorentz(xv), _lorentz(yv)
        return self.gamma1 * qy**self.r * (-2 * _jmul(xv) / qx + 2 * _jmul(yv) / qy) + self.gamma2 * (xv - yv)

    def sample_direction(self, rng, space):
        n = space.size
        bar = rng.standard_normal(n - 1)
        bar *= rng.uniform(0, 0.9) / max(np.linalg.norm(bar), 1e-300)
        u = np.append(bar, 1.0)
        return u / np.linalg.norm(u)

    def local_certificate(self, center, radius):
        c = center.data
        nb = float(np.linalg.norm(c[:-1]))
        tn = c[-1] - radius
        if tn <= nb + radius:
            raise DomainError("sampling ball leaves the Lorentz cone")
        q_lo = tn**2 - (nb + radius) ** 2
        R = float(np.linalg.norm(c)) + radius
        q_hi = (c[-1] + radius) ** 2
        return self._local(q_hi**self.r, 2 / q_lo + 4 * R**2 / q_lo**2, radius)


# ---------------------------------------------------------------------------
# array-level convenience functions


def sqnorm_value(x: Point, y: Point) -> float:
    return SqNormDistance().value(x, y)


def metric_value(x: Point, y: Point, H) -> float:
    return MetricDistance(H).value(x, y)


def exp_distance_value(z: Point, w: Point, gamma1: float) -> float:
    return ExpDistance(gamma1).value(z, w)


def de2_value(xz: Point, yw: Point, gamma1: float, gamma2: float) -> float:
    return De2Distance(gamma1, gamma2).value(xz, yw)


def orthant_value(x: Point, y: Point, gamma1: float, gamma2: float, r: float) -> float:
    return OrthantDistance(gamma1, gamma2, r).value(x, y)


def psd_value(X: Point, Y: Point, gamma1: float, gamma2: float, r: float) -> float:
    return PSDDistance(gamma1, gamma2, r).value(X, Y)


def soc_value(x: Point, y: Point, gamma1: float, gamma2: float, r: float) -> float:
    return SOCDistance(gamma1, gamma2, r).value(x, y)


def distance_grad_x(d: ProxGradDistance, x: Point, y: Point) -> Point:
    return d.grad_x(x, y)


# ---------------------------------------------------------------------------
# certificate validation


@dataclass(frozen=True)
class SampleSpec:
    """Where and how densely to sample pairs for :func:`validate_certificate`.

    Both points of each pair are drawn from the ball ``B(center, radius)``,
    which must lie inside ``C``.
    """

    center: Point
    count: int = 200
    radius: float = 0.5
    seed: int = 0


@dataclass
class CheckResult:
    passed: bool
    worst: float = 0.0
    worst_sample: Optional[tuple] = None
    checked: int = 0

    def note(self, slack: float, sample):
        """Record a sample; ``slack < 0`` is a violation."""
        self.checked += 1
        if self.worst_sample is None or slack < self.worst:
            self.worst, self.worst_sample = slack, sample
        if slack < 0:
            self.passed = False


@dataclass
class CertificateReport:
    family: str
    checks: dict[str, CheckResult] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def summary(self) -> dict:
        return {
            name: {"passed": c.passed, "worst_slack": c.worst, "checked": c.checked}
            for name, c in self.checks.items()
        }


def _ball_sample(rng, center: Point, radius: float, d: ProxGradDistance) -> Point:
    for _ in range(100):
        u = rng.standard_normal(center.space.size)
        u *= radius * rng.uniform() ** (1 / u.size) / np.linalg.norm(u)
        p = center.like(center.data + u)
        if np.linalg.norm(p.data - center.data) <= radius and d.contains(p):
            return p
    raise DomainError("could not draw interior samples; shrink the radius")


def validate_certificate(d: ProxGradDistance, spec: SampleSpec, certificate: Optional[DistanceCertificate] = None) -> CertificateReport:
    """Spot-check the prox-grad distance axioms and certificate constants.

    Checks nonnegativity, ``D(x, y) = 0`` iff ``x = y`` (to 1e-12),
    ``grad_x D(y, y) = 0``, superlinear growth along five rays into ``C``,
    and every numeric constant present in ``certificate`` (defaults to
    ``d.certificate``). Inequality constants are tested on pairs within
    the certificate radius. A global certificate on a cone domain is also
    probed near the boundary with ``x = t y``, ``t`` in ``[1e-8, 1e-1]``.

    Returns
    -------
    CertificateReport
        One :class:`CheckResult` per condition; never raises on failure.
    """
    cert = d.certificate if certificate is None else certificate
    rng = np.random.default_rng(spec.seed)
    report = CertificateReport(d.family)
    checks = report.checks
    for name in ("nonnegative", "zero_iff_equal", "grad_at_center", "superlinear"):
        checks[name] = CheckResult(True)
    if cert.error_bound is not None:
        checks["error_bound"] = CheckResult(True)
    if cert.inverse_bound is not None:
        checks["inverse_bound"] = CheckResult(True)
    if cert.grad_lipschitz is not None:
        checks["grad_lipschitz"] = CheckResult(True)

    def check_constants(x, y):
        dist = np.linalg.norm(x.data - y.data)
        if cert.radius is not None and dist > cert.radius:
            return
        D = d.value(x, y)
        tol = 1e-10 * max(1.0, abs(D)) + 1e-14
        if cert.error_bound is not None:
            a, nu = cert.error_bound
            checks["error_bound"].note(D - a * dist ** (1 + nu) + tol, (x, y))
        if cert.inverse_bound is not None:
            L, nu = cert.inverse_bound
            checks["inverse_bound"].note(L * dist ** (1 + nu) - D + tol, (x, y))
        if cert.grad_lipschitz is not None:
            g = d.grad_x(x, y).norm() if d.contains(x) else math.inf
            checks["grad_lipschitz"].note(cert.grad_lipschitz * dist - g + tol * (1 + g), (x, y))

    for _ in range(spec.count):
        x = _ball_sample(rng, spec.center, spec.radius, d)
        y = _ball_sample(rng, spec.center, spec.radius, d)
        D = d.value(x, y)
        checks["nonnegative"].note(D, (x, y))
        gap = np.linalg.norm(x.data - y.data)
        # D vanishes only at x = y: positive pairs must give positive D
        checks["zero_iff_equal"].note(D if gap > 1e-12 else 1.0, (x, y))
        checks["zero_iff_equal"].note(1e-12 - abs(d.value(y, y)), (y, y))
        checks["grad_at_center"].note(1e-12 - d.grad_x(y, y).norm(), (y, y))
        check_constants(x, y)

    scales = 10.0 * 2.0 ** np.arange(6)
    for _ in range(5):
        y = _ball_sample(rng, spec.center, spec.radius, d)
        u = d.sample_direction(rng, y.space)
        ratios = []
        for s in scales:
            x = y.like(y.data + s * u)
            ratios.append(d.value(x, y) / max(x.norm(), 1e-300))
        ratios = np.array(ratios)
        increasing = bool(np.all(np.diff(ratios) > 0))
        growth = ratios[-1] / ratios[0] if ratios[0] > 0 else 0.0
        checks["superlinear"].note(min(growth - 4.0, 1.0 if increasing else -1.0), (y, u))

    if cert.scope == "global" and d.domain_tag != "whole":
        for t in np.logspace(-8, -1, 8):
            y = _ball_sample(rng, spec.center, spec.radius, d)
            check_constants(y.like(t * y.data), y)
    return report
