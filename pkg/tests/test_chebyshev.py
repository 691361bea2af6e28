import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from circuitflow.chebyshev import ChebyshevTable, PolyKind, eval_T, eval_U, evaluate


def test_polykind_has_exactly_two_variants():
    assert {k.name for k in PolyKind} == {"FIRST", "SECOND"}


def test_first_kind_base_cases():
    assert eval_T(0, 1.05) == 1.0
    assert eval_T(1, 26.0) == 26.0


def test_first_kind_degree_four_closed_form():
    # 8g^4 - 8g^2 + 1 at g=26
    assert eval_T(4, 26.0) == 3650401.0


def test_second_kind_base_cases():
    assert eval_U(-1, 2.0) == 0.0
    assert eval_U(0, 1.05) == 1.0
    assert eval_U(2, 1.05) == pytest.approx(3.41, abs=1e-12)


def test_cosh_identity_first_kind():
    for t in np.linspace(0.0, 3.0, 50):
        g = math.cosh(t)
        for l in range(21):
            want = math.cosh(l * t)
            assert abs(eval_T(l, g) - want) <= 1e-10 * max(1.0, want)


def test_sinh_ratio_identity_second_kind():
    for t in np.linspace(0.1, 3.0, 50):
        g = math.cosh(t)
        for l in range(21):
            want = math.sinh((l + 1) * t) / math.sinh(t)
            assert abs(eval_U(l, g) - want) <= 1e-9 * abs(want)


@pytest.mark.parametrize("gamma", [1.05, 2.0, 26.0])
def test_pell_identity(gamma):
    # relative to the squared magnitude: the difference of two ~1e25 terms
    # cannot resolve an absolute 1 in double precision
    for l in range(1, 16):
        t2 = eval_T(l, gamma) ** 2
        lhs = t2 - (gamma**2 - 1.0) * eval_U(l - 1, gamma) ** 2
        assert abs(lhs - 1.0) <= 1e-9 * max(1.0, t2)


def test_overflow_is_an_error_naming_inputs():
    with pytest.raises(OverflowError, match="gamma=26"):
        eval_T(1000, 26.0)
    with pytest.raises(OverflowError):
        eval_U(1000, 26.0)


def test_domain_validation():
    with pytest.raises(ValueError):
        eval_T(-1, 2.0)
    with pytest.raises(ValueError):
        eval_U(-2, 2.0)
    with pytest.raises(ValueError):
        eval_T(3, 0.99)


def test_dispatcher_matches_direct_calls():
    assert evaluate(PolyKind.FIRST, 5, 1.3) == eval_T(5, 1.3)
    assert evaluate(PolyKind.SECOND, 5, 1.3) == eval_U(5, 1.3)


@given(l=st.integers(0, 18), gamma=st.floats(1.0, 30.0))
def test_table_matches_scalar_recurrence(l, gamma):
    table = ChebyshevTable(gamma, 20)
    assert table.T(l) == eval_T(l, gamma)
    assert table.U(l - 1) == eval_U(l - 1, gamma)
