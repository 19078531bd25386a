import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gvdpgm.core import (
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
from gvdpgm.errors import ConfigError, SpaceMismatchError
from gvdpgm.penalties import ConeIndicator, ZeroPenalty
from gvdpgm.problems import build_poisson_inverse


def half_sq(space):
    return CompositeObjective(space, lambda x: 0.5 * x.norm() ** 2, lambda x: x, ZeroPenalty())


class TestPoint:
    def test_symmetric_is_exactly_symmetric(self, rng):
        X = Point.symmetric(rng.normal(size=(4, 4)))
        assert np.array_equal(X.array, X.array.T)

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            Point.vector([1.0, np.nan])

    def test_wrong_size(self):
        with pytest.raises(SpaceMismatchError):
            Point(Space.vector(3), np.zeros(2))

    def test_data_read_only(self):
        x = Point.vector([1.0, 2.0])
        with pytest.raises(ValueError):
            x.data[0] = 5.0

    def test_product_blocks_keep_order(self):
        p = Point.product(Point.vector([1, 2]), Point.matrix([[3, 4], [5, 6]]))
        a, b = p.blocks
        assert a.data.tolist() == [1, 2]
        assert b.array.tolist() == [[3, 4], [5, 6]]

    def test_arithmetic_checks_space(self):
        with pytest.raises(SpaceMismatchError):
            Point.vector([1, 2]) + Point.vector([1, 2, 3])


class TestInner:
    def test_vectors(self):
        assert point_inner(Point.vector([1, 2]), Point.vector([3, 4])) == 11

    def test_identity_matrices(self):
        assert point_inner(Point.symmetric(np.eye(2)), Point.symmetric(np.eye(2))) == 2

    def test_orthogonal_product(self):
        x = Point.product(Point.vector([1, 0]), Point.vector([0, 1]))
        y = Point.product(Point.vector([0, 1]), Point.vector([1, 0]))
        assert point_inner(x, y) == 0

    # entries below 1e-100 would underflow when squared
    @given(arrays(np.float64, st.integers(1, 8), elements=st.one_of(
        st.just(0.0), st.floats(1e-100, 1e6), st.floats(-1e6, -1e-100))))
    def test_positive_definite(self, v):
        x = Point.vector(v)
        val = point_inner(x, x)
        assert val >= 0
        assert (val == 0) == (not np.any(v))


class TestCompositeValue:
    def test_zero_at_origin(self):
        assert composite_value(half_sq(Space.vector(2)), Point.vector([0, 0])) == 0

    def test_indicator_outside(self):
        obj = CompositeObjective(Space.vector(2), lambda x: 0.5 * x.norm() ** 2, lambda x: x,
                                 ConeIndicator("orthant"))
        assert composite_value(obj, Point.vector([-1, 1])) == math.inf

    def test_poisson_value(self):
        obj = build_poisson_inverse(np.array([[1.0, 1.0]]), np.array([1.0]))
        assert composite_value(obj, Point.vector([1, 1])) == pytest.approx(2 - math.log(2), abs=1e-15)

    def test_nan_becomes_inf(self):
        obj = CompositeObjective(Space.vector(1), lambda x: math.nan, lambda x: x, ZeroPenalty())
        assert composite_value(obj, Point.vector([0])) == math.inf

    def test_space_mismatch(self):
        with pytest.raises(SpaceMismatchError):
            composite_value(half_sq(Space.vector(2)), Point.vector([0, 0, 0]))


class TestSolverConfig:
    @pytest.mark.parametrize("kw", [
        {"beta": 1.0}, {"sigma": 0.0}, {"sigma": 1.5}, {"p_min": 0.0}, {"p_min": 1.2},
        {"max_outer_iters": 0}, {"tol_residual": 0.0}, {"tol_step": -1.0},
    ])
    def test_rejects_out_of_range(self, kw):
        with pytest.raises(ConfigError):
            SolverConfig(**kw)

    def test_schedule_checked(self):
        cfg = SolverConfig(p_min=0.5, p_schedule=lambda k: 0.25)
        with pytest.raises(ConfigError):
            cfg.p(1)

    def test_default_p(self):
        assert SolverConfig(p_min=0.3).p(7) == 0.3


def test_trace_columns_and_views():
    rec = IterationRecord(0, 1.0, 2.0, 1, 2.0, 0.5, 0.1, 0.01, 3.0)
    assert rec.row() == (0, 1.0, 2.0, 1, 2.0, 0.5, 0.1, 0.01, 3.0)
    assert TRACE_COLUMNS == ("k", "F_x", "F_merit", "i_k", "beta_pow_ik", "D_step", "step_norm",
                             "residual_norm", "wall_ms")
    t = Trace(Point.vector([0.0]), 3.0, [rec])
    assert t.F_values.tolist() == [3.0, 1.0]
    assert t.merit_values.tolist() == [3.0, 2.0]
    assert t.interior_ok and not t.approximate
    assert t.column("D_step").tolist() == [0.5]


@settings(max_examples=50)
@given(st.integers(1, 5), st.integers(0, 2**31 - 1))
def test_product_symmetric_blocks_symmetrized(n, seed):
    r = np.random.default_rng(seed)
    sp = Space.product(Space.vector(2), Space.symmetric(n))
    p = Point(sp, r.normal(size=sp.size))
    M = p.blocks[1].array
    assert np.array_equal(M, M.T)


def test_package_docstring_example():
    import doctest

    import gvdpgm

    assert doctest.testmod(gvdpgm).failed == 0
