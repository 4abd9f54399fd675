import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from putinar_kit.bounds import (
    BoundInputs,
    gamma_double_prime,
    laurent_slot_bound,
    lasserre_gap_bound,
    loja_worst_case,
    moment_bound,
    nie_bound,
    putinar_bound_sharp,
    putinar_bound_simplified,
    schweighofer_bound,
    weierstrass_bound,
)
from putinar_kit.errors import InvalidParameter

BASE = BoundInputs(n=2, r=1, c=1, L=1, d_g=2, d_f=2, epsilon_f=1 / 3)


def test_simplified_example():
    expected = 8 * 2 ** 10 * 4 * 2 ** 7 * 3 ** 5
    assert putinar_bound_simplified(BASE) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(1.02e9, rel=1e-2)


def test_sharp_not_above_simplified():
    assert putinar_bound_sharp(BASE) <= putinar_bound_simplified(BASE)


# the simplified form only dominates from n = 2 on
@given(
    st.integers(2, 5),
    st.integers(1, 3),
    st.integers(1, 4),
    st.integers(1, 4),
    st.floats(0.01, 1.0),
    st.floats(1.0, 3.0),
    st.floats(1.0, 5.0),
)
def test_sharp_dominated_everywhere(n, r, d_g, d_f, eps, L, c):
    inp = BoundInputs(n=n, r=r, d_g=d_g, d_f=d_f, epsilon_f=eps, L=L, c=c)
    assert putinar_bound_sharp(inp) <= putinar_bound_simplified(inp) * (1 + 1e-12)


def test_univariate_sharp_exceeds_simplified():
    inp = BoundInputs()
    assert putinar_bound_sharp(inp) > putinar_bound_simplified(inp)


def test_weierstrass_boundary_case():
    inp = BASE.with_(norm_f=2.0, epsilon=2.0)
    other = BASE.with_(norm_f=5.0, epsilon=5.0)
    assert weierstrass_bound(inp) == pytest.approx(weierstrass_bound(other))
    with pytest.raises(InvalidParameter):
        weierstrass_bound(BASE.with_(norm_f=1.0, epsilon=2.0))


def test_lasserre_gap_example():
    inp = BoundInputs(n=2, L=1, norm_f=1, d_f=2, ell=1e6)
    val = lasserre_gap_bound(inp)
    assert val == pytest.approx(2 ** 1.4 * 1e-6 ** (1 / 5) * gamma_double_prime(inp))
    assert lasserre_gap_bound(inp.with_(norm_f=3.0)) == pytest.approx(3 * val)
    assert lasserre_gap_bound(inp.with_(ell=1e12)) < val


def test_moment_bound_example_and_monotonicity():
    inp = BoundInputs(n=2, L=1, t=1, epsilon=0.5)
    mb = moment_bound(inp)
    from putinar_kit.bounds import gamma

    assert mb.ell == pytest.approx(6 ** 5 * 3 ** 5 * 2 ** 5 * gamma(inp), rel=1e-12)
    assert mb.min_level == 2 * 1 + 2
    assert moment_bound(inp.with_(t=2)).ell > mb.ell
    assert moment_bound(inp.with_(epsilon=0.25)).ell > mb.ell


def test_laurent_slot():
    assert laurent_slot_bound(2, 3, 1.0, 1.0) == pytest.approx(math.pi * 3 * 2)
    big = laurent_slot_bound(1, 2, 1.0, 10.0)
    assert big == pytest.approx(math.sqrt(2 * math.pi ** 2 * 4 * 3 * 9))
    with pytest.raises(InvalidParameter):
        laurent_slot_bound(1, 2, 0.0, 1.0)


def test_comparison_shapes():
    inp = BoundInputs(n=1, d_f=2)
    assert nie_bound(inp, 2.0, 1.0) >= schweighofer_bound(inp, 2.0, 1.0)
    assert nie_bound(inp, 4.0, 1.0) > nie_bound(inp, 2.0, 1.0)
    assert schweighofer_bound(inp, 4.0, 1.0) > schweighofer_bound(inp, 2.0, 1.0)


def test_loja_worst_case_examples():
    assert loja_worst_case(2, 1, 2) == 162
    assert loja_worst_case(1, 1, 1) == 3
    assert loja_worst_case(1, 1, 3) == 45


@pytest.mark.parametrize(
    "bad", [dict(n=0), dict(epsilon_f=0.0), dict(epsilon_f=1.5), dict(L=0.5), dict(c=0.5)]
)
def test_invalid_inputs(bad):
    with pytest.raises(InvalidParameter):
        putinar_bound_simplified(BoundInputs(**bad))
