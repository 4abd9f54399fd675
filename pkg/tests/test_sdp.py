import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from putinar_kit.errors import InvalidParameter, NotPsd
from putinar_kit.gram import GramCertificatePart, gram_to_sos
from putinar_kit.poly import MultiPoly
from putinar_kit.sdp import INFEASIBLE, OPTIMAL, UNBOUNDED, SdpProblem, solve_sdp


def _single(A_list, b, C):
    A = np.array(A_list, float)
    return SdpProblem((A.shape[1],), (A,), np.asarray(b, float), (np.asarray(C, float),))


def test_trace_minimization():
    res = solve_sdp(_single([[[1, 0], [0, 0]]], [1.0], np.eye(2)))
    assert res.status == OPTIMAL
    assert res.primal_value == pytest.approx(1.0, abs=1e-7)


def test_infeasible_diagonal():
    # X11 = -1 cannot hold for a PSD X
    res = solve_sdp(_single([[[1, 0], [0, 0]]], [-1.0], np.zeros((2, 2))))
    assert res.status == INFEASIBLE


def test_unbounded_primal():
    # minimize -trace X subject to X12 = 0
    res = solve_sdp(_single([[[0, 0.5], [0.5, 0]]], [0.0], -np.eye(2)))
    assert res.status == UNBOUNDED


def test_multi_block_and_determinism():
    A1 = np.array([[[1.0, 0], [0, 0]], [[0, 0], [0, 1.0]]])
    A2 = np.array([[[1.0]], [[1.0]]])
    p = SdpProblem((2, 1), (A1, A2), np.array([1.0, 2.0]), (np.array([[1.0, 0.3], [0.3, 1.0]]), np.array([[3.0]])))
    r1, r2 = solve_sdp(p), solve_sdp(p)
    assert r1.status == OPTIMAL
    assert r1.iterations == r2.iterations
    assert abs(r1.primal_value - r2.primal_value) <= 1e-12
    # optimum puts block 2 at 0 and block 1 at diag(1, 2) with the off-diagonal pushed negative
    assert r1.primal_value == pytest.approx(3.0 - 0.6 * np.sqrt(2), abs=1e-6)


def test_validation():
    with pytest.raises(InvalidParameter):
        solve_sdp(_single([[[1, 1], [0, 0]]], [1.0], np.eye(2)))
    big = SdpProblem((401,), (np.zeros((1, 401, 401)),), np.zeros(1), (np.eye(401),))
    with pytest.raises(InvalidParameter):
        solve_sdp(big)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_random_feasible_problems_reach_optimality(seed):
    rng = np.random.default_rng(seed)
    n, m = 4, 3
    A = rng.standard_normal((m, n, n))
    A = A + A.transpose(0, 2, 1)
    X0 = np.eye(n)
    b = np.array([np.vdot(Ai, X0) for Ai in A])
    M = rng.standard_normal((n, n))
    C = M @ M.T + np.eye(n)
    res = solve_sdp(SdpProblem((n,), (A,), b, (C,)))
    assert res.status == OPTIMAL
    assert np.linalg.eigvalsh(res.X[0])[0] >= -1e-8
    assert np.allclose([np.vdot(Ai, res.X[0]) for Ai in A], b, atol=1e-6)
    assert res.primal_value <= np.vdot(C, X0) + 1e-8


def test_gram_to_sos_examples():
    basis = ((0,), (1,))
    squares, res = gram_to_sos(GramCertificatePart(basis, np.eye(2)))
    assert res <= 1e-14 and len(squares) == 2
    squares, res = gram_to_sos(GramCertificatePart(basis, np.ones((2, 2))))
    (T,) = MultiPoly.variables(1)
    assert len(squares) == 1 and (squares[0] * squares[0] - (1 + T) ** 2).coeff_norm() <= 1e-12
    with pytest.raises(NotPsd):
        gram_to_sos(GramCertificatePart(basis, np.diag([1.0, -1.0])))
