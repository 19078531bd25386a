"""Generalized variable-distance proximal gradient method.

Minimizes ``F = f + g`` with ``f`` smooth and ``g`` nonsmooth, using a
prox-grad distance that may change from one iteration to the next and a
nonmonotone Armijo backtracking rule.

>>> import numpy as np
>>> from gvdpgm import build_quadratic, L1Penalty, SqNormDistance, SolverConfig, Point
>>> from gvdpgm import constant_schedule, gvdpgm_run
>>> obj = build_quadratic(np.eye(2), np.array([-1.0, -0.05]), L1Penalty(0.1))
>>> d = SqNormDistance()
>>> trace = gvdpgm_run(obj, constant_schedule(d, obj.g), SolverConfig(), Point(obj.space, np.zeros(2)))
>>> np.round(trace.x.data, 6).tolist()
[0.9, 0.0]
"""

from .core import (
    TRACE_COLUMNS,
    CompositeObjective,
    IterationRecord,
    Point,
    SolverConfig,
    Space,
    Trace,
    composite_value,
    point_inner,
)
from .distances import (
    De2Distance,
    DistanceCertificate,
    ExpDistance,
    MetricDistance,
    OrthantDistance,
    ProxGradDistance,
    PSDDistance,
    SampleSpec,
    SOCDistance,
    SqNormDistance,
    validate_certificate,
)
from .errors import (
    BacktrackingError,
    ConfigError,
    DomainError,
    GVDPGMError,
    LoadError,
    NumericError,
    SpaceMismatchError,
)
from .oracle import RateEstimate, brute_force_prox, crosscheck, estimate_rate, finite_diff_grad
from .penalties import (
    BlockPenalty,
    ConeIndicator,
    L1Penalty,
    TrimmedExpPenalty,
    TrimmedL1Penalty,
    ZeroPenalty,
)
from .problems import (
    TrimmedLogisticProblem,
    build_klnmf,
    build_poisson_inverse,
    build_psd_demo,
    build_quadratic,
    build_soc_demo,
    build_trimmed_logistic,
)
from .prox import ProxResult, pair_prox
from .solver import DistanceSchedule, constant_schedule, gvdpgm_run

__version__ = "0.1.0"
