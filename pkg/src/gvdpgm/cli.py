"""Command line experiment runner.

Usage::

    gvdpgm run CONFIG [CONFIG ...] [--seed N] [--out DIR] [--jobs J]
    gvdpgm compare CONFIG [--seed N] [--out DIR]
    gvdpgm validate-distance CONFIG [--seed N] [--out DIR]

Exit status: 0 success, 2 config error, 3 load error, 4 solver error,
5 failed verification (trace invariants, cross-check or certificate
outcome).
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import problems
from .core import Point, Space, Trace
from .distances import (
    DistanceCertificate,
    De2Distance,
    ExpDistance,
    MetricDistance,
    OrthantDistance,
    PSDDistance,
    SampleSpec,
    SOCDistance,
    SqNormDistance,
    validate_certificate,
)
from .errors import BacktrackingError, ConfigError, DomainError, GVDPGMError, LoadError, NumericError
from .io import ExperimentConfig, load_config, load_dataset, resolve_seed, solver_config, write_json, write_trace
from .oracle import CROSSCHECK_FAMILIES, crosscheck, estimate_rate
from .penalties import L1Penalty, Penalty, TrimmedL1Penalty, ZeroPenalty
from .prox import pair_prox
from .solver import constant_schedule, gvdpgm_run

log = logging.getLogger("gvdpgm")

EXIT_OK, EXIT_CONFIG, EXIT_LOAD, EXIT_SOLVER, EXIT_VERIFY = 0, 2, 3, 4, 5

MERIT_RTOL = 1e-12


# ---------------------------------------------------------------------------
# building blocks from config sections


def build_penalty(spec) -> Penalty:
    """``{kind: zero | l1 | trimmed_l1, lambda, K, nonneg}``."""
    if spec is None:
        return ZeroPenalty()
    if not isinstance(spec, dict):
        raise ConfigError("penalty must be a mapping")
    kind = spec.get("kind", "zero")
    lam = float(spec.get("lambda", 0.0))
    if kind == "zero":
        return ZeroPenalty()
    if kind == "l1":
        return L1Penalty(lam)
    if kind == "trimmed_l1":
        return TrimmedL1Penalty(lam, int(spec.get("K", 0)), bool(spec.get("nonneg", False)))
    raise ConfigError(f"unknown penalty kind {kind!r}")


def build_distance(section: dict, space: Optional[Space] = None):
    family = section.get("family")
    g1 = float(section.get("gamma1", 1.0))
    g2 = float(section.get("gamma2", 1.0))
    r = float(section.get("r", 0.0))
    if family == "sqnorm":
        d = SqNormDistance()
    elif family == "metric":
        if "H" in section:
            H = np.asarray(section["H"], dtype=float)
        elif "H_diag" in section:
            H = np.diag(np.asarray(section["H_diag"], dtype=float))
        else:
            raise ConfigError("metric distance needs H or H_diag")
        d = MetricDistance(H)
    elif family == "exp":
        d = ExpDistance(g1)
    elif family == "de2":
        d = De2Distance(g1, g2)
    elif family == "orthant":
        d = OrthantDistance(g1, g2, r)
    elif family == "psd":
        d = PSDDistance(g1, g2, r)
    elif family == "soc":
        d = SOCDistance(g1, g2, r)
    else:
        raise ConfigError(f"unknown distance family {family!r}")
    if space is not None and not d.supports(space):
        raise ConfigError(f"{family} distance does not act on {space}")
    return d


def _matrix(cfg: ExperimentConfig, spec: dict, key: str, kind: str):
    """Inline value ``key`` or file ``key_path``."""
    if f"{key}_path" in spec:
        return load_dataset(cfg.resolve(spec[f"{key}_path"]), kind)
    if key in spec:
        return np.asarray(spec[key], dtype=float)
    return None


@dataclass
class Experiment:
    obj: object
    distance: object
    prox: object
    x0: Point
    F_star: Optional[float] = None


def build_experiment(cfg: ExperimentConfig, seed: int) -> Experiment:
    """Problem, distance, paired subproblem solver and start point."""
    spec = cfg.problem
    kind = spec.get("kind")
    g = build_penalty(spec.get("penalty"))
    F_star = None
    prox = None
    rng = np.random.default_rng(seed)

    if kind == "quadratic":
        Q, c = _matrix(cfg, spec, "Q", "matrix"), _matrix(cfg, spec, "c", "vector")
        if Q is None or c is None:
            Q, c = problems.random_quadratic(int(spec.get("n", 5)), float(spec.get("cond", 100.0)), seed)
        obj = problems.build_quadratic(Q, c, g)
        if g.tag == "zero" and obj.lower_bound_hint is not None:
            F_star = obj.lower_bound_hint
        x0 = np.zeros(c.size)
        d = build_distance(cfg.distance, obj.space)
    elif kind == "poisson":
        A, b = _matrix(cfg, spec, "A", "matrix"), _matrix(cfg, spec, "b", "vector")
        if A is None or b is None:
            A, b = problems.random_poisson(int(spec.get("m", 20)), int(spec.get("n", 10)), seed,
                                           float(spec.get("noise", 0.05)))
        obj = problems.build_poisson_inverse(A, b, g)
        x0 = np.full(A.shape[1], float(np.sum(b) / np.sum(A)))
        d = build_distance(cfg.distance, obj.space)
    elif kind == "klnmf":
        rank = int(spec.get("rank", 3))
        V = _matrix(cfg, spec, "V", "matrix")
        if V is None:
            V = problems.random_klnmf(int(spec.get("m", 20)), int(spec.get("n", 15)), rank, seed,
                                      float(spec.get("noise", 0.0)))
        obj = problems.build_klnmf(V, rank, g)
        scale = math.sqrt(float(np.mean(V)) / rank)
        x0 = scale * rng.uniform(0.5, 1.5, obj.space.size)
        d = build_distance(cfg.distance, obj.space)
    elif kind == "trimmed_logistic":
        if "data_path" in spec:
            data = load_dataset(cfg.resolve(spec["data_path"]), "classification")
        else:
            data = problems.random_classification(int(spec.get("m", 40)), int(spec.get("p", 3)), seed,
                                                  float(spec.get("flip", 0.1)))
        if cfg.distance.get("family", "de2") != "de2":
            raise ConfigError("trimmed_logistic runs on the de2 distance")
        prob = problems.TrimmedLogisticProblem(data, int(spec.get("K", 0)), float(spec.get("lambda", 0.0)))
        obj, d, prox = problems.build_trimmed_logistic(
            prob, float(cfg.distance.get("gamma1", 1.0)), float(cfg.distance.get("gamma2", 1.0))
        )
        x0 = np.zeros(obj.space.size)
    elif kind == "conic_demo":
        cone = spec.get("cone")
        target = spec.get("target")
        n = int(spec.get("n", 3))
        if cone == "psd":
            if target is None:
                B = rng.standard_normal((n, n))
                target = (B + B.T) / 2
            obj = problems.build_psd_demo(target, g)
            x0 = np.eye(obj.space.shape[0]).reshape(-1)
        elif cone == "soc":
            if target is None:
                target = rng.standard_normal(n)
            obj = problems.build_soc_demo(target, g)
            x0 = np.zeros(obj.space.size)
            x0[-1] = 1.0
        else:
            raise ConfigError(f"conic_demo cone must be psd or soc, got {cone!r}")
        d = build_distance(cfg.distance, obj.space)
    else:
        raise ConfigError(f"unknown problem kind {kind!r}")

    if "x0" in spec:
        x0 = np.asarray(spec["x0"], dtype=float).reshape(-1)
        if x0.size != obj.space.size:
            raise ConfigError(f"x0 has {x0.size} entries, expected {obj.space.size}")
    if prox is None:
        prox = pair_prox(d, obj.g)
    return Experiment(obj, d, prox, Point(obj.space, x0), F_star)


# ---------------------------------------------------------------------------
# verbs


def check_trace(trace: Trace, rtol: float = MERIT_RTOL) -> list[str]:
    """Violations of ``F_x <= F_merit`` and a nonincreasing merit sequence."""
    problems_found = []
    prev = trace.F0
    for rec in trace.records:
        if not rec.F_x <= rec.F_merit:
            problems_found.append(f"k={rec.k}: F_x={rec.F_x!r} exceeds F_merit={rec.F_merit!r}")
        if rec.F_merit > prev + rtol * max(1.0, abs(prev)):
            problems_found.append(f"k={rec.k}: F_merit increased from {prev!r} to {rec.F_merit!r}")
        prev = rec.F_merit
    return problems_found


def _out_path(cfg: ExperimentConfig, key: str, default: str, out: Optional[str]) -> Path:
    name = Path(cfg.output.get(key, default))
    if out is not None:
        return Path(out) / name.name
    return name


def _run_report(cfg, exp: Experiment, trace: Trace, config, seed: int, violations) -> dict:
    F = trace.F_values
    report = {
        "config": str(cfg.path),
        "seed": seed,
        "problem": exp.obj.name,
        "distance": exp.distance.family,
        "distance_params": {k: v for k, v in exp.distance.params.items() if np.isscalar(v)},
        "termination": trace.termination,
        "iterations": len(trace),
        "F0": trace.F0,
        "F_final": float(F[-1]) if len(F) else trace.F0,
        "F_merit_final": float(trace.merit_values[-1]) if len(F) else trace.F0,
        "interior_ok": trace.interior_ok,
        "boundary_flag": trace.boundary_flag,
        "approximate_steps": int(sum(r.approximate for r in trace.records)),
        "x_final": trace.x.data if trace.x is not None else None,
        "invariant_violations": violations,
    }
    if len(trace) >= 30:
        est = estimate_rate(trace, exp.F_star, config.tol_step)
        F_star = exp.F_star if exp.F_star is not None else float(F[-1]) - config.tol_step
        report["rate"] = est.to_dict()
        report["F_star"] = F_star
        report["R_k"] = [float(v - F_star) for v in F]
    else:
        report["rate"] = None
        report["R_k"] = None
    return report


def run_experiment(config_path, seed: Optional[int] = None, out: Optional[str] = None) -> int:
    """Run one config; returns the exit status."""
    try:
        cfg = load_config(config_path)
        seed = resolve_seed(seed, cfg.problem.get("seed"))
        config = solver_config(cfg.solver)
        exp = build_experiment(cfg, seed)
        stem = Path(config_path).stem
        trace_path = _out_path(cfg, "trace_path", f"{stem}_trace.csv", out)
        report_path = _out_path(cfg, "report_path", f"{stem}_report.json", out)
        timing = bool(cfg.output.get("timing", False))
    except LoadError as exc:
        log.error("load error: %s", exc)
        return EXIT_LOAD
    except (ConfigError, DomainError) as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG

    status = EXIT_OK
    try:
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            trace = gvdpgm_run(exp.obj, constant_schedule(exp.distance, exp.obj.g, exp.prox), config, exp.x0)
    except BacktrackingError as exc:
        log.error("solver error: %s", exc)
        trace = exc.trace
        status = EXIT_SOLVER
    except (NumericError, DomainError) as exc:
        log.error("solver error: %s", exc)
        return EXIT_SOLVER

    violations = check_trace(trace)
    write_trace(trace, trace_path, timing)
    write_json(_run_report(cfg, exp, trace, config, seed, violations), report_path)
    if violations and status == EXIT_OK:
        for v in violations[:10]:
            log.error("invariant violated: %s", v)
        status = EXIT_VERIFY
    F_last = trace.records[-1].F_x if trace.records else trace.F0
    print(f"{config_path}: {trace.termination} after {len(trace)} iterations, F={F_last:.12g} -> {trace_path}")
    return status


def compare_report(config_path, seed: Optional[int] = None, out: Optional[str] = None) -> int:
    """Closed form vs oracle on randomized instances of one family."""
    try:
        cfg = load_config(config_path)
        spec = cfg.section("compare")
        family = spec.get("family")
        if family not in CROSSCHECK_FAMILIES:
            raise ConfigError(f"compare family must be one of {CROSSCHECK_FAMILIES}, got {family!r}")
        seed = resolve_seed(seed, spec.get("seed"))
        count = int(spec.get("count", 200))
        n = spec.get("n")
        report_path = _out_path(cfg, "report_path", f"{Path(config_path).stem}_report.json", out)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        rep = crosscheck(
            family, count, seed, None if n is None else int(n),
            value_tol=float(spec.get("value_tol", 1e-7)),
            arg_tol=float(spec.get("arg_tol", 1e-6)),
            fallback=bool(spec.get("fallback", False)),
        )
    data = rep.to_dict()
    data["seed"] = seed
    write_json(data, report_path)
    verdict = "pass" if rep.passed else "FAIL"
    print(f"{family}: {count} instances, max value gap {rep.max_value_gap:.3g}, "
          f"max argument gap {rep.max_arg_gap:.3g}: {verdict} -> {report_path}")
    return EXIT_OK if rep.passed else EXIT_VERIFY


def _certificate(d, spec, center: Point, radius: float) -> Optional[DistanceCertificate]:
    if spec in (None, "default"):
        return None
    if spec == "local":
        return d.local_certificate(center, radius)
    if not isinstance(spec, dict):
        raise ConfigError("certificate must be 'default', 'local' or a mapping")
    pair = lambda v: None if v is None else (float(v[0]), float(v[1]))  # noqa: E731
    return DistanceCertificate(
        error_bound=pair(spec.get("error_bound")),
        inverse_bound=pair(spec.get("inverse_bound")),
        grad_lipschitz=None if spec.get("grad_lipschitz") is None else float(spec["grad_lipschitz"]),
        radius=None if spec.get("radius") is None else float(spec["radius"]),
        scope=spec.get("scope", "global"),
    )


def _center(d, spec) -> Point:
    """``center`` as a list, or ``{n: ...}`` for the family's canonical interior point."""
    center = spec.get("center", {"n": 3})
    if isinstance(center, dict):
        n = int(center.get("n", 3))
        if d.family == "psd":
            return Point(Space.symmetric(n), np.eye(n).reshape(-1))
        if d.family == "soc":
            v = np.zeros(n)
            v[-1] = 2.0
            return Point(Space.vector(n), v)
        if d.family == "de2":
            return Point(Space.product(Space.vector(n), Space.vector(n)), np.full(2 * n, 0.5))
        return Point(Space.vector(n), np.ones(n))
    arr = np.asarray(center, dtype=float)
    if d.family == "psd":
        return Point(Space.symmetric(arr.shape[0]), arr.reshape(-1))
    if d.family == "de2":
        k = arr.size // 2
        return Point(Space.product(Space.vector(k), Space.vector(arr.size - k)), arr.reshape(-1))
    return Point(Space.vector(arr.size), arr.reshape(-1))


def validate_distance(config_path, seed: Optional[int] = None, out: Optional[str] = None) -> int:
    """Check a distance certificate; the outcome must match ``expect``."""
    try:
        cfg = load_config(config_path)
        d = build_distance(cfg.distance)
        sample = cfg.section("sample")
        center = _center(d, sample)
        radius = float(sample.get("radius", 0.5))
        spec = SampleSpec(center, int(sample.get("count", 200)), radius, resolve_seed(seed, sample.get("seed")))
        cert = _certificate(d, cfg.raw.get("certificate"), center, radius)
        expect = cfg.raw.get("expect", "pass")
        if expect not in ("pass", "fail"):
            raise ConfigError("expect must be 'pass' or 'fail'")
        report_path = _out_path(cfg, "report_path", f"{Path(config_path).stem}_report.json", out)
        rep = validate_certificate(d, spec, cert)
    except (ConfigError, DomainError) as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    outcome = "pass" if rep.passed else "fail"
    write_json({"family": d.family, "params": d.params, "checks": rep.summary(), "outcome": outcome,
                "expect": expect, "seed": spec.seed}, report_path)
    print(f"{d.family}: certificate {outcome} (expected {expect}) -> {report_path}")
    return EXIT_OK if outcome == expect else EXIT_VERIFY


# ---------------------------------------------------------------------------
# entry point


def _run_one(args):
    path, seed, out = args
    return run_experiment(path, seed, out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gvdpgm", description="Variable distance proximal gradient experiments.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None, help="overrides GVDPGM_SEED and the config seed")
        p.add_argument("--out", default=None, help="directory for output files")

    p = sub.add_parser("run", help="run the solver on one or more configs")
    p.add_argument("configs", nargs="+")
    p.add_argument("--jobs", type=int, default=1, help="configs to run concurrently")
    common(p)
    p = sub.add_parser("compare", help="closed-form subproblem solver vs oracle")
    p.add_argument("config")
    common(p)
    p = sub.add_parser("validate-distance", help="check a distance certificate")
    p.add_argument("config")
    common(p)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.verb == "run":
            jobs = [(c, args.seed, args.out) for c in args.configs]
            if args.jobs > 1 and len(jobs) > 1:
                with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                    codes = list(pool.map(_run_one, jobs))
            else:
                codes = [_run_one(j) for j in jobs]
            return max(codes)
        if args.verb == "compare":
            return compare_report(args.config, args.seed, args.out)
        return validate_distance(args.config, args.seed, args.out)
    except GVDPGMError as exc:
        log.error("%s", exc)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
