import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from putinar_kit.errors import InvalidParameter
from putinar_kit.moments import (
    PseudoMomentSeq,
    dirac_moments,
    generating_section_check,
    halfspace_tube_distance,
    hausdorff_estimate,
    hull_distance,
    moment_matrix,
    norm_comparison_check,
    trace_bound_check,
    truncate,
    tube_membership,
)
from putinar_kit.poly import MultiPoly
from putinar_kit.semialgebraic import Problem
from putinar_kit.sos import moment_sdp

(X,) = MultiPoly.variables(1)
INTERVAL = Problem(X, (1 - X * X,))


def test_truncation():
    L = PseudoMomentSeq(1, 4, [1, 0, 0, 0, 0])
    assert list(truncate(L, 2).values) == [1, 0, 0]
    assert truncate(L, 4).as_dict() == L.as_dict()
    assert truncate(truncate(L, 3), 1).as_dict() == truncate(L, 1).as_dict()


@given(st.lists(st.floats(-1, 1), min_size=1, max_size=3), st.integers(0, 4))
def test_dirac_mass(x, t):
    assert dirac_moments(x, t).mass == 1.0


def test_dirac_examples():
    assert list(dirac_moments([-1.0], 2).values) == [1, -1, 1]
    assert list(dirac_moments([0.0, 0.0], 2).values) == [1, 0, 0, 0, 0, 0]


def test_moment_matrix_examples():
    H = moment_matrix(dirac_moments([-1.0], 2), 1).matrix
    assert np.allclose(H, [[1, -1], [-1, 1]])
    assert np.linalg.matrix_rank(H) == 1
    uniform = PseudoMomentSeq(1, 2, [1, 0, 1 / 3])
    assert np.allclose(moment_matrix(uniform, 1).matrix, [[1, 0], [0, 1 / 3]])
    assert np.allclose(moment_matrix(PseudoMomentSeq(1, 2, [0, 0, 0]), 1).matrix, 0)


def test_trace_bounds():
    rep = trace_bound_check(dirac_moments([0.0], 4), 2)
    assert rep.trace == 1.0 and rep.holds
    assert trace_bound_check(dirac_moments([0.0], 0), 0).trace == 1.0
    L, _ = moment_sdp(INTERVAL, 4, {(1,): 0.3, (2,): -1.0, (3,): 0.5})
    assert trace_bound_check(L, 2).holds


def test_generating_section():
    assert generating_section_check(PseudoMomentSeq(1, 4, [0] * 5), 4)
    assert generating_section_check(dirac_moments([0.5], 4), 4)
    assert generating_section_check(PseudoMomentSeq(1, 4, [0, 0, 0, 0, 1]), 4)
    assert not generating_section_check(PseudoMomentSeq(1, 4, [0, 0, 1, 0, 1]), 4)


def test_norm_comparison():
    assert norm_comparison_check(MultiPoly.const(1.0, 2), 2).holds
    rep = norm_comparison_check(1 + X + X * X, 2)
    assert rep.max_norm == pytest.approx(3.0) and rep.bound == pytest.approx(3.0) and rep.holds
    with pytest.raises(InvalidParameter):
        norm_comparison_check(X ** 3, 2)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_norm_comparison_random(seed):
    rng = np.random.default_rng(seed)
    Y = MultiPoly.variables(2)
    f = sum((float(c) * Y[0] ** i * Y[1] ** j for (i, j), c in zip([(0, 0), (1, 0), (0, 1), (1, 1), (2, 0)], rng.standard_normal(5))), MultiPoly.const(0.0, 2))
    assert norm_comparison_check(f, 2).holds


def test_hull_distance():
    V = np.array([[0.0, 1.0], [0.0, 0.0]])
    d, w = hull_distance(V, np.array([0.5, 0.0]))
    assert d <= 1e-4 and w.sum() == pytest.approx(1.0)
    d, _ = hull_distance(V, np.array([0.5, 1.0]))
    assert d == pytest.approx(1.0, abs=1e-3)


def test_tube_membership():
    assert tube_membership(dirac_moments([0.3], 4), INTERVAL, 4, 0.0).holds
    bad = PseudoMomentSeq(1, 4, [1, 0, -1, 0, 1])
    assert not tube_membership(bad, INTERVAL, 4, 0.0).holds
    assert tube_membership(bad, INTERVAL, 4, 1e6).holds


def test_convex_tube_distance_is_order_epsilon():
    square = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    for eps in (0.1, 0.01):
        d = halfspace_tube_distance(square, 64, eps)
        assert eps <= d <= eps * 1.01


def test_hausdorff_univariate_exact():
    est = hausdorff_estimate(INTERVAL, 1, 2, objectives=6)
    assert est.dist_lower <= 1e-6
    with pytest.raises(InvalidParameter):
        hausdorff_estimate(INTERVAL, 2, 2)
