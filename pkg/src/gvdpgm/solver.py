"""Outer loop, nonmonotone Armijo backtracking and termination.

One outer iteration, starting from ``x^k`` with merit value ``F_k``:

1. ``a = grad f(x^k)``;
2. for ``i = 0, 1, ...`` solve ``min <a, x> + beta^i D_k(x, x^k) + g(x)`` and
   accept the first candidate with
   ``F(x^{k,i}) <= F_k - sigma beta^i D_k(x^{k,i}, x^k)``;
3. ``F_{k+1} = p_{k+1} F(x^{k+1}) + (1 - p_{k+1}) F_k``.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .core import CompositeObjective, IterationRecord, Point, SolverConfig, Trace
from .distances import ProxGradDistance
from .errors import BacktrackingError, ConfigError, DomainError, SpaceMismatchError
from .prox import ProxResult, pair_prox

__all__ = [
    "SolverState",
    "DistanceSchedule",
    "constant_schedule",
    "StepResult",
    "backtracking_step",
    "merit_update",
    "stationarity_residual",
    "Decision",
    "check_termination",
    "gvdpgm_run",
]

log = logging.getLogger(__name__)

ProxFn = Callable[[Point, Point, float], ProxResult]


@dataclass
class SolverState:
    x: Point
    F_merit: float
    k: int = 0
    last_i: int = 0
    trace: list = field(default_factory=list)


class DistanceSchedule:
    """Chooses ``(D_k, prox)`` per iteration; every choice must share one domain.

    Parameters
    ----------
    select : callable
        ``k -> (ProxGradDistance, prox)`` where ``prox(a, y, gamma)``
        returns a :class:`~gvdpgm.prox.ProxResult`.
    """

    def __init__(self, select: Callable[[int], tuple[ProxGradDistance, ProxFn]]):
        self._select = select
        self.domain_tag: Optional[str] = None

    def __call__(self, k: int) -> tuple[ProxGradDistance, ProxFn]:
        d, prox = self._select(k)
        if self.domain_tag is None:
            self.domain_tag = d.domain_tag
        elif d.domain_tag != self.domain_tag:
            raise ConfigError(
                f"distance at iteration {k} lives on {d.domain_tag!r}, schedule started on {self.domain_tag!r}"
            )
        return d, prox


def constant_schedule(d: ProxGradDistance, g, prox: Optional[ProxFn] = None) -> DistanceSchedule:
    """The same distance (and its paired solver) at every iteration."""
    prox = pair_prox(d, g) if prox is None else prox
    return DistanceSchedule(lambda k: (d, prox))


class StepResult(NamedTuple):
    x: Point
    i: int
    D_step: float
    F_x: float
    approximate: bool


def backtracking_step(state: SolverState, schedule: DistanceSchedule, obj: CompositeObjective,
                      config: SolverConfig, grad: Optional[Point] = None) -> StepResult:
    """Smallest ``i`` whose candidate passes the nonmonotone Armijo test.

    Candidates outside the interior of the distance domain are rejected
    without evaluating ``f``.

    Raises
    ------
    BacktrackingError
        No candidate accepted for ``i <= max_inner_iters``; carries the last
        candidate.
    """
    d, prox = schedule(state.k)
    x = state.x
    a = obj.f_gradient(x) if grad is None else grad
    last = None
    for i in range(int(config.max_inner_iters) + 1):
        gamma = config.beta**i
        res = prox(a, x, gamma)
        cand = res.x
        last = cand
        if not d.contains(cand):
            continue
        Fc = obj.value(cand)
        D = d.value(cand, x)
        if math.isfinite(Fc) and Fc <= state.F_merit - config.sigma * gamma * D:
            return StepResult(cand, i, D, Fc, res.approximate)
    raise BacktrackingError(
        f"no acceptable step within {config.max_inner_iters} backtracking steps at k={state.k}",
        candidate=last,
    )


def merit_update(F_merit: float, F_new: float, p: float) -> float:
    """``p F_new + (1 - p) F_merit``, kept inside ``[F_new, F_merit]`` under rounding."""
    value = p * F_new + (1 - p) * F_merit
    value = max(value, F_new)
    if F_new <= F_merit:
        value = min(value, F_merit)
    return value


def stationarity_residual(obj: CompositeObjective, d: ProxGradDistance, x_next: Point, x_prev: Point,
                          beta_pow: float, grad_prev: Optional[Point] = None,
                          grad_next: Optional[Point] = None) -> float:
    """Norm of ``grad f(x+) - grad f(x) - beta^i grad_x D(x+, x)``; NaN if undefined."""
    try:
        g_next = obj.f_gradient(x_next) if grad_next is None else grad_next
        g_prev = obj.f_gradient(x_prev) if grad_prev is None else grad_prev
        gd = d.grad_x(x_next, x_prev)
    except (DomainError, SpaceMismatchError):
        return math.nan
    xi = g_next.data - g_prev.data - beta_pow * gd.data
    out = float(np.linalg.norm(xi))
    return out if math.isfinite(out) else math.nan


class Decision(NamedTuple):
    stop: bool
    rule: Optional[str]


def check_termination(record: IterationRecord, config: SolverConfig) -> Decision:
    """Residual, then step size, then iteration budget."""
    if not math.isnan(record.residual_norm) and record.residual_norm <= config.tol_residual:
        return Decision(True, "residual")
    if record.beta_pow_ik * record.D_step <= config.tol_step:
        return Decision(True, "step")
    if record.k + 1 >= config.max_outer_iters:
        return Decision(True, "budget")
    return Decision(False, None)


def gvdpgm_run(obj: CompositeObjective, schedule: DistanceSchedule, config: SolverConfig, x0: Point) -> Trace:
    """Run the method from ``x0`` until a termination rule fires.

    Returns
    -------
    Trace
        One record per outer iteration. ``boundary_flag`` is set when a
        barrier distance with ``r <= 1`` let the iterates approach the
        boundary (no stationarity guarantee applies there).

    Raises
    ------
    BacktrackingError
        With the partial trace attached as ``trace``.
    """
    if x0.space != obj.space:
        raise SpaceMismatchError(f"start point in {x0.space}, objective on {obj.space}")
    d0, _ = schedule(0)
    if not d0.contains(x0):
        raise DomainError("start point must be interior to the distance domain")
    F0 = obj.value(x0)
    if not math.isfinite(F0):
        raise ValueError("F(x0) must be finite")
    trace = Trace(x0=x0, F0=F0)
    state = SolverState(x=x0, F_merit=F0, trace=trace.records)
    grad = obj.f_gradient(x0)
    min_margin = math.inf
    while True:
        t0 = time.perf_counter()
        d, _ = schedule(state.k)
        try:
            step = backtracking_step(state, schedule, obj, config, grad)
        except BacktrackingError as exc:
            trace.x, trace.termination = state.x, "backtracking_failure"
            exc.trace = trace
            raise
        beta_pow = config.beta**step.i
        grad_next = obj.f_gradient(step.x)
        resid = stationarity_residual(obj, d, step.x, state.x, beta_pow, grad, grad_next)
        F_merit = merit_update(state.F_merit, step.F_x, config.p(state.k + 1))
        margin = d.interior_margin(step.x)
        min_margin = min(min_margin, margin)
        record = IterationRecord(
            k=state.k,
            F_x=step.F_x,
            F_merit=F_merit,
            i_k=step.i,
            beta_pow_ik=beta_pow,
            D_step=step.D_step,
            step_norm=(step.x - state.x).norm(),
            residual_norm=resid,
            wall_ms=1e3 * (time.perf_counter() - t0),
            interior_margin=margin,
            approximate=step.approximate,
        )
        trace.records.append(record)
        state.x, state.F_merit, state.last_i, grad = step.x, F_merit, step.i, grad_next
        decision = check_termination(record, config)
        state.k += 1
        if decision.stop:
            trace.x, trace.termination = state.x, decision.rule
            break
    r = getattr(d, "r", None)
    if r is not None and r <= 1 and d.domain_tag != "whole":
        scale = 1.0 + trace.x.norm()
        trace.boundary_flag = bool(min_margin <= 1e-8 * scale)
    log.debug("stopped after %d iterations (%s)", len(trace), trace.termination)
    return trace
