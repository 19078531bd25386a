"""Acceptance criteria, one test each.

Every test records a one-line PASS/FAIL verdict that is printed in the
terminal summary (and directly when the module is run as a script).
"""

import filecmp
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, CONFIGS
from gvdpgm import cli
from gvdpgm.core import CompositeObjective, Point
from gvdpgm.distances import SampleSpec, validate_certificate, De2Distance
from gvdpgm.io import load_config, resolve_seed, solver_config
from gvdpgm.oracle import (
    CROSSCHECK_FAMILIES,
    crosscheck,
    estimate_rate,
    estimate_rate_from_gaps,
    finite_diff_grad,
)
from gvdpgm.problems import TrimmedLogisticProblem, build_trimmed_logistic, random_classification
from gvdpgm.problems import reformulated_min_over_z
from gvdpgm.solver import constant_schedule, gvdpgm_run
from test_distances import FAMILIES
from test_problems import _builders

RUN_CONFIGS = sorted((CONFIGS / "run").glob("*.yaml"))


def verdict(n, title, ok, detail):
    line = f"criterion {n} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
    ACCEPTANCE_LINES[n] = line
    print(line)
    assert ok, line


def load_experiment(path):
    cfg = load_config(path)
    seed = resolve_seed(None, cfg.problem.get("seed"))
    return cli.build_experiment(cfg, seed), solver_config(cfg.solver)


def run_config(path, wrap_f=None):
    exp, config = load_experiment(path)
    obj = exp.obj
    if wrap_f is not None:
        obj = CompositeObjective(obj.space, wrap_f(obj.f_value), obj.f_gradient, obj.g, obj.lower_bound_hint,
                                 obj.name)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        trace = gvdpgm_run(obj, constant_schedule(exp.distance, obj.g, exp.prox), config, exp.x0)
    return exp, config, trace


# ---------------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_1_closed_form_prox():
    t0 = time.perf_counter()
    reports = [crosscheck(fam, 200, seed=0) for fam in CROSSCHECK_FAMILIES]
    elapsed = time.perf_counter() - t0
    bad = {r.family: [f.seed for f in r.failures][:5] for r in reports if not r.passed}
    vgap = max(r.max_value_gap for r in reports)
    agap = max(r.max_arg_gap for r in reports)
    ok = not bad and elapsed <= 120
    verdict(1, "closed-form prox vs oracle", ok,
            f"6 families x 200, max value gap {vgap:.1e}, max arg gap {agap:.1e}, {elapsed:.1f} s"
            + (f", failures {bad}" if bad else ""))


def test_criterion_2_invariants():
    notes = []
    for path in RUN_CONFIGS:
        exp, cfg, trace = run_config(path)
        issues = cli.check_trace(trace)
        F_lower = exp.obj.lower_bound_hint
        if F_lower is not None:
            total = float(np.sum(trace.column("beta_pow_ik") * trace.column("D_step")))
            bound = (trace.F0 - F_lower) / (cfg.p_min * cfg.sigma)
            if total > bound:
                issues.append(f"sum beta^i D = {total:.3g} exceeds {bound:.3g}")
        else:
            issues.append("no lower bound")
        D = trace.column("D_step")
        if trace.termination == "step" and not D[-1] <= cfg.tol_step:
            issues.append(f"last D_step {D[-1]:.2e} > tol_step")
        if trace.termination == "residual" and not D[-1] <= 1e-8 * max(1.0, D[0]):
            issues.append(f"last D_step {D[-1]:.2e} has not decayed")
        if trace.termination not in ("residual", "step"):
            issues.append(f"terminated by {trace.termination}")
        if issues:
            notes.append(f"{path.stem}: {issues[:3]}")
    verdict(2, "algorithm invariants", not notes, f"{len(RUN_CONFIGS)} shipped runs" + (f", {notes}" if notes else ""))


def soft_threshold(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _reference_solution(Q, c, lam):
    # plain proximal gradient with step 1/L until the fixed-point gap is below 1e-12
    L = float(np.linalg.eigvalsh(Q)[-1])
    x = np.zeros(c.size)
    for _ in range(200_000):
        x_new = soft_threshold(x - (Q @ x + c) / L, lam / L)
        if np.max(np.abs(x_new - x)) <= 1e-12 / L:
            return x_new
        x = x_new
    raise AssertionError("reference solve did not converge")


def test_criterion_3_stationarity():
    path = CONFIGS / "run" / "quadratic_l1.yaml"
    exp, cfg, trace = run_config(path)
    spec = load_config(path).problem
    from gvdpgm.problems import random_quadratic

    Q, c = random_quadratic(int(spec["n"]), float(spec["cond"]), int(spec["seed"]))
    ev = np.linalg.eigvalsh(Q)
    x_ref = _reference_solution(Q, c, float(spec["penalty"]["lambda"]))
    res = trace.records[-1].residual_norm
    err = float(np.max(np.abs(trace.x.data - x_ref)))
    ok = (trace.termination == "residual" and res <= 1e-6 and len(trace) <= 500 and err <= 1e-5
          and c.size == 5 and abs(ev[-1] / ev[0] - 100) < 1e-6)
    verdict(3, "stationarity on quadratic + l1", ok,
            f"residual {res:.2e} after {len(trace)} iterations, distance to reference {err:.1e}")


def test_criterion_4_interior():
    notes, details = [], []
    for name in ("poisson_orthant", "klnmf_orthant", "psd_demo", "soc_demo"):
        exp, _, _ = run_config(CONFIGS / "run" / f"{name}.yaml")
        outside = []

        def wrap(f_value, d=exp.distance, outside=outside):
            def inner(x):
                if not d.interior_margin(x) > 0:
                    outside.append(x)
                return f_value(x)

            return inner

        t0 = time.perf_counter()
        _, _, trace = run_config(CONFIGS / "run" / f"{name}.yaml", wrap)
        elapsed = time.perf_counter() - t0
        margin = min(exp.distance.interior_margin(trace.x), exp.distance.interior_margin(trace.x0))
        details.append(f"{name} {len(trace)} its {elapsed:.2f} s")
        if outside or not trace.interior_ok or not margin > 0 or elapsed > 30:
            notes.append(f"{name}: outside={len(outside)} interior_ok={trace.interior_ok} {elapsed:.1f} s")
    verdict(4, "interior invariance", not notes, ", ".join(notes or details))


def test_criterion_5_reformulation():
    rng = np.random.default_rng(2024)
    worst_identity, worst_joint = 0.0, 0.0
    for i in range(20):
        m, p, K = int(rng.integers(3, 7)), int(rng.integers(1, 4)), i % 3
        prob = TrimmedLogisticProblem(random_classification(m, p, seed=i), K, float(rng.uniform(0, 1)))
        obj, _, _ = build_trimmed_logistic(prob)
        for _ in range(5):
            x = rng.normal(size=p)
            orig = prob.original_value(x)
            worst_identity = max(worst_identity, abs(reformulated_min_over_z(prob, x) - orig))
            # the minimizing z: log(1 + e^w) on kept coordinates, w on the K trimmed ones
            w = prob.margins(x)
            z = np.log1p(np.exp(w))
            trimmed = np.argsort(w, kind="stable")[:K]
            z[trimmed] = w[trimmed]
            worst_joint = max(worst_joint, abs(obj.value(Point(obj.space, np.concatenate([x, z]))) - orig))
    at_zero = reformulated_min_over_z(TrimmedLogisticProblem(random_classification(4, 2), 0, 0.0), np.zeros(2))
    ok = worst_identity <= 1e-8 and worst_joint <= 1e-8 and abs(at_zero - 4 * math.log(2)) <= 1e-12
    verdict(5, "reformulation equivalence", ok,
            f"100 points, max gap {worst_identity:.1e} (identity), {worst_joint:.1e} (joint objective)")


def test_criterion_6_rate():
    path = CONFIGS / "run" / "quadratic_rate.yaml"
    exp, cfg, trace = run_config(path)
    est = estimate_rate(trace, exp.F_star, cfg.tol_step)
    geo = estimate_rate_from_gaps(0.5 ** np.arange(60))
    k = np.arange(1, 400, dtype=float)
    power = estimate_rate_from_gaps(k**-2.0, ks=k)
    ok = (cfg.p_min == 1.0 and est.regime == "linear" and est.linear_ratio < 1
          and geo.regime == "linear" and abs(geo.linear_ratio - 0.5) <= 0.01
          and power.regime == "sublinear" and abs(power.fitted_theta - 0.25) <= 0.02)
    verdict(6, "rate regime", ok,
            f"quadratic {est.regime} ratio {est.linear_ratio:.4f}, 0.5^k ratio {geo.linear_ratio:.4f}, "
            f"k^-2 theta {power.fitted_theta:.4f}")


def test_criterion_7_certificates(tmp_path):
    results = {}
    for path in sorted((CONFIGS / "validate").glob("*.yaml")):
        results[path.stem] = cli.main(["validate-distance", str(path), "--out", str(tmp_path)])
    # D_e2 lower constant gamma1/2, upper constant from L~ = cosh(1) on radius 1
    d = De2Distance(0.8, 1.0)
    cert = d.certificate
    de2_consts = (cert.error_bound[0] == pytest.approx(0.8 / 2)
                  and d.params.get("L_tilde", math.cosh(1.0)) == pytest.approx(math.cosh(1.0))
                  and cert.radius == pytest.approx(1.0))
    centre = Point.product(Point.vector([0.3, -0.2]), Point.vector([0.5, 0.0]))
    de2_ok = validate_certificate(d, SampleSpec(centre, 200, 1.0, 0)).passed
    expected = {"sqnorm", "metric", "de2", "orthant_r0", "orthant_r2", "psd_r0", "psd_r2", "soc_r0", "soc_r2",
                "orthant_r0_global_inverse"}
    ok = set(results) >= expected and all(v == 0 for v in results.values()) and de2_consts and de2_ok
    verdict(7, "distance certificates", ok,
            f"{sum(v == 0 for v in results.values())}/{len(results)} configs matched expectation "
            "(false orthant r=0 global inverse bound rejected)")


def test_criterion_8_gradients():
    rng = np.random.default_rng(8)
    worst = {}
    for name, (obj, draw) in _builders().items():
        w = 0.0
        for _ in range(50):
            x = Point.symmetric(rng.normal(size=(3, 3))) if draw is None else Point(obj.space, draw(rng))
            w = max(w, float(np.max(np.abs(obj.f_gradient(x).data - finite_diff_grad(obj.f_value, x).data))))
        worst[name] = w
    for name, make, sample in FAMILIES:
        d = make()
        w = 0.0
        for _ in range(50):
            x, y = sample(rng), sample(rng)
            fd = finite_diff_grad(lambda p: d.value(p, y), x)
            w = max(w, float(np.max(np.abs(fd.data - d.grad_x(x, y).data))))
        worst[f"D_{name}"] = w
    top = max(worst, key=worst.get)
    ok = all(v <= 1e-4 for v in worst.values())
    verdict(8, "gradient checks", ok, f"{len(worst)} functions x 50 points, worst {worst[top]:.1e} ({top})")


def test_criterion_9_determinism(tmp_path):
    paths = [str(p) for p in RUN_CONFIGS]
    codes = [cli.main(["run", *paths, "--out", str(tmp_path / d)]) for d in ("a", "b")]
    traces = sorted(p.name for p in (tmp_path / "a").glob("*_trace.csv"))
    same = [filecmp.cmp(tmp_path / "a" / t, tmp_path / "b" / t, shallow=False) for t in traces]
    ok = codes == [0, 0] and len(traces) == len(paths) and all(same)
    verdict(9, "determinism", ok, f"{sum(same)}/{len(paths)} traces byte-identical across two runs")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
