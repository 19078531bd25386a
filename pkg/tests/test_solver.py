import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gvdpgm.core import CompositeObjective, IterationRecord, Point, SolverConfig, Space
from gvdpgm.distances import OrthantDistance, SqNormDistance
from gvdpgm.errors import BacktrackingError, ConfigError, DomainError
from gvdpgm.penalties import L1Penalty, ZeroPenalty
from gvdpgm.problems import build_poisson_inverse, build_quadratic, random_poisson, random_quadratic
from gvdpgm.prox import ProxResult, pair_prox
from gvdpgm.solver import (
    DistanceSchedule,
    SolverState,
    backtracking_step,
    check_termination,
    constant_schedule,
    gvdpgm_run,
    merit_update,
    stationarity_residual,
)


def half_sq(n, scale=1.0):
    return build_quadratic(scale * np.eye(n), np.zeros(n))


def record(**kw):
    base = dict(k=3, F_x=1.0, F_merit=1.0, i_k=0, beta_pow_ik=1.0, D_step=1.0, step_norm=1.0,
                residual_norm=1.0, wall_ms=0.0)
    base.update(kw)
    return IterationRecord(**base)


# --- backtracking ---------------------------------------------------------


def test_first_candidate_accepted():
    obj = half_sq(2)
    x0 = Point.vector([1.0, 1.0])
    cfg = SolverConfig(beta=2.0, sigma=0.5)
    step = backtracking_step(SolverState(x0, obj.value(x0)), constant_schedule(SqNormDistance(), obj.g), obj, cfg)
    assert step.i == 0
    assert np.allclose(step.x.data, 0.0)
    assert step.D_step == pytest.approx(1.0)


def test_zero_gradient_is_fixed_point():
    obj = build_quadratic(np.eye(2), np.array([-1.0, 2.0]))
    x0 = Point.vector([1.0, -2.0])
    step = backtracking_step(SolverState(x0, obj.value(x0)), constant_schedule(SqNormDistance(), obj.g), obj,
                             SolverConfig())
    assert step.i == 0 and step.D_step == 0 and np.array_equal(step.x.data, x0.data)


@pytest.mark.parametrize("curv", [10.0, -1.0])
def test_matches_scripted_enumeration(curv):
    # f = curv/2 x^2 at x0 = 1; candidate for gamma is 1 - curv/gamma
    obj = build_quadratic(np.array([[curv]]), np.zeros(1))
    cfg = SolverConfig(beta=2.0, sigma=0.9)
    F0 = obj.value(Point.vector([1.0]))
    expected = None
    for i in range(11):
        gam = 2.0**i
        x = 1 - curv / gam
        D = 0.5 * (x - 1) ** 2
        if 0.5 * curv * x * x <= F0 - 0.9 * gam * D:
            expected = i
            break
    step = backtracking_step(SolverState(Point.vector([1.0]), F0), constant_schedule(SqNormDistance(), obj.g),
                             obj, cfg)
    assert step.i == expected
    if curv > 0:
        assert expected > 0


def test_non_interior_candidates_skip_f():
    seen = []

    def f_value(x):
        seen.append(x.data.copy())
        return float(np.sum(x.data**2))

    obj = CompositeObjective(Space.vector(1), f_value, lambda x: x.like(2 * x.data), ZeroPenalty())
    d = OrthantDistance(1, 1, 0)
    calls = iter([Point.vector([-1.0]), Point.vector([0.5])])
    sched = DistanceSchedule(lambda k: (d, lambda a, y, g: ProxResult(next(calls))))
    step = backtracking_step(SolverState(Point.vector([1.0]), 1.0), sched, obj, SolverConfig(sigma=0.1))
    assert step.i == 1
    assert all(v[0] > 0 for v in seen)


def test_failure_carries_candidate_and_trace():
    obj = half_sq(1)
    d = SqNormDistance()
    sched = DistanceSchedule(lambda k: (d, lambda a, y, g: ProxResult(y.like(y.data + 1.0))))
    cfg = SolverConfig(max_inner_iters=5)
    with pytest.raises(BacktrackingError) as info:
        gvdpgm_run(obj, sched, cfg, Point.vector([1.0]))
    assert info.value.candidate is not None
    assert info.value.trace.termination == "backtracking_failure"


def test_schedule_domain_must_not_change():
    obj = half_sq(1, 10.0)
    ds = [SqNormDistance(), OrthantDistance()]
    sched = DistanceSchedule(lambda k: (ds[min(k, 1)], pair_prox(ds[min(k, 1)], obj.g)))
    with pytest.raises(ConfigError):
        gvdpgm_run(obj, sched, SolverConfig(tol_residual=1e-300, tol_step=1e-300), Point.vector([1.0]))


def test_start_must_be_interior():
    obj = half_sq(1)
    d = OrthantDistance()
    with pytest.raises(DomainError):
        gvdpgm_run(obj, constant_schedule(d, obj.g), SolverConfig(), Point.vector([0.0]))


def test_variable_distance_schedule():
    Q, c = random_quadratic(4, 10, seed=2)
    obj = build_quadratic(Q, c)
    ds = [SqNormDistance(), OrthantDistance(1, 1, 0)]
    from gvdpgm.distances import MetricDistance

    metrics = [MetricDistance(np.diag([1.0, 2.0, 1.0, 0.5])), SqNormDistance()]
    sched = DistanceSchedule(lambda k: (metrics[k % 2], pair_prox(metrics[k % 2], obj.g)))
    trace = gvdpgm_run(obj, sched, SolverConfig(tol_residual=1e-8), Point.vector(np.zeros(4)))
    assert trace.termination in ("residual", "step")
    assert np.allclose(trace.x.data, np.linalg.solve(Q, -c), atol=1e-5)
    del ds


# --- merit, residual, termination ----------------------------------------


def test_merit_examples():
    assert merit_update(3.0, 1.0, 1.0) == 1.0
    assert merit_update(2.0, 0.0, 0.5) == 1.0


@given(st.floats(-1e6, 1e6), st.floats(0, 1e6), st.floats(0.01, 1.0))
def test_merit_between(F_new, gap, p):
    F_merit = F_new + gap
    out = merit_update(F_merit, F_new, p)
    assert F_new <= out <= F_merit


def test_residual_fixed_point():
    obj = half_sq(2)
    x = Point.vector([0.3, 0.1])
    assert stationarity_residual(obj, SqNormDistance(), x, x, 4.0) == 0


def test_residual_quadratic_identity(rng):
    obj = half_sq(3)
    x0, x1 = Point.vector(rng.normal(size=3)), Point.vector(rng.normal(size=3))
    for bp in (1.0, 2.0, 8.0):
        assert stationarity_residual(obj, SqNormDistance(), x1, x0, bp) == pytest.approx(
            abs(1 - bp) * (x1 - x0).norm(), rel=1e-12)


def test_residual_recomputation(rng):
    Q, c = random_quadratic(4, 5, seed=1)
    obj = build_quadratic(Q, c)
    x0, x1 = Point.vector(rng.normal(size=4)), Point.vector(rng.normal(size=4))
    g0, g1 = Q @ x0.data + c, Q @ x1.data + c
    expect = np.linalg.norm(g1 - g0 - 2.0 * (x1.data - x0.data))
    assert stationarity_residual(obj, SqNormDistance(), x1, x0, 2.0) == pytest.approx(expect, rel=1e-12)


def test_residual_undefined_outside():
    obj = half_sq(1)
    assert math.isnan(stationarity_residual(obj, OrthantDistance(), Point.vector([-1.0]), Point.vector([1.0]), 1.0))


def test_termination_rules():
    cfg = SolverConfig(tol_residual=1e-6, max_outer_iters=10)
    assert check_termination(record(residual_norm=1e-9), cfg) == (True, "residual")
    assert check_termination(record(k=0, D_step=0.0), cfg) == (True, "step")
    assert check_termination(record(), cfg) == (False, None)
    assert check_termination(record(k=9), cfg) == (True, "budget")
    assert check_termination(record(residual_norm=math.nan), cfg) == (False, None)


# --- whole runs -----------------------------------------------------------


def test_one_step_run():
    obj = half_sq(2)
    trace = gvdpgm_run(obj, constant_schedule(SqNormDistance(), obj.g), SolverConfig(beta=2.0, sigma=0.5),
                       Point.vector([1.0, 1.0]))
    assert len(trace) == 1
    assert np.allclose(trace.x.data, 0.0)
    assert trace.termination == "residual"


def test_stationary_start():
    obj = build_quadratic(np.eye(2), np.array([1.0, -1.0]))
    trace = gvdpgm_run(obj, constant_schedule(SqNormDistance(), obj.g), SolverConfig(), Point.vector([-1.0, 1.0]))
    assert len(trace) == 1 and trace.records[0].step_norm == 0


def _check_invariants(trace, cfg, F_lower=None):
    merit = trace.merit_values
    F = trace.F_values
    assert np.all(F <= merit)
    for k, rec in enumerate(trace.records):
        # F_{k+1} <= F_k - p_min sigma beta^i D
        drop = cfg.p_min * cfg.sigma * rec.beta_pow_ik * rec.D_step
        assert merit[k + 1] <= merit[k] - drop + 1e-12 * max(1.0, abs(merit[k]))
    if F_lower is not None:
        total = float(np.sum(trace.column("beta_pow_ik") * trace.column("D_step")))
        assert total <= (trace.F0 - F_lower) / (cfg.p_min * cfg.sigma) + 1e-9


def test_nonmonotone_invariants_poisson():
    A, b = random_poisson(20, 10, seed=3)
    obj = build_poisson_inverse(A, b)
    d = OrthantDistance(1, 1, 2)
    cfg = SolverConfig(p_min=0.5, sigma=0.01, max_outer_iters=400, tol_step=1e-13)
    trace = gvdpgm_run(obj, constant_schedule(d, obj.g), cfg, Point.vector(np.ones(10)))
    _check_invariants(trace, cfg, obj.lower_bound_hint)
    assert trace.interior_ok
    gaps = (trace.merit_values - trace.F_values)[-10:]
    assert np.all(gaps <= max(trace.records[-1].F_merit * 1e-9, 1e-9) + (trace.merit_values[-11] - trace.F_values[-1]))


def test_monotone_when_p_is_one():
    Q, c = random_quadratic(5, 50, seed=4)
    obj = build_quadratic(Q, c, L1Penalty(0.2))
    cfg = SolverConfig(max_outer_iters=300)
    trace = gvdpgm_run(obj, constant_schedule(SqNormDistance(), obj.g), cfg, Point.vector(np.zeros(5)))
    assert np.all(np.diff(trace.F_values) <= 0)
    assert np.array_equal(trace.F_values, trace.merit_values)
    _check_invariants(trace, cfg, obj.lower_bound_hint)


def test_f_never_evaluated_outside_orthant():
    A, b = random_poisson(15, 6, seed=5)
    base = build_poisson_inverse(A, b)
    bad = []

    def f_value(x):
        if np.any(x.data <= 0):
            bad.append(x.data.copy())
        return base.f_value(x)

    obj = CompositeObjective(base.space, f_value, base.f_gradient, base.g, base.lower_bound_hint)
    for r in (0.0, 1.0, 2.0):
        trace = gvdpgm_run(obj, constant_schedule(OrthantDistance(1, 1, r), obj.g),
                           SolverConfig(max_outer_iters=200), Point.vector(np.ones(6)))
        assert trace.interior_ok
    assert not bad


def test_boundary_flag_for_low_r():
    # minimizer at the origin, approached through the orthant with r = 0
    obj = build_quadratic(np.eye(2), np.array([1.0, 2.0]))
    cfg = SolverConfig(max_outer_iters=50, tol_step=1e-300, tol_residual=1e-300)
    trace = gvdpgm_run(obj, constant_schedule(OrthantDistance(1, 1, 0), obj.g), cfg, Point.vector([1e-9, 1e-9]))
    assert trace.interior_ok
    assert trace.boundary_flag
    inner = build_quadratic(np.eye(2), np.array([-1.0, -2.0]))
    far = gvdpgm_run(inner, constant_schedule(OrthantDistance(1, 1, 0), inner.g), cfg, Point.vector([3.0, 0.5]))
    assert not far.boundary_flag
