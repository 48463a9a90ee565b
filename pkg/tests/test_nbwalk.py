import math
from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given, strategies as st

from sixvertex import nbwalk

GRID = [Fraction(3, 10), Fraction(1), Fraction(2)]


def test_walk_weights_by_hand():
    a, b = sympy.symbols("a b")
    assert nbwalk.walk_weight_g("SSS", "a", a, b) == a**3
    assert nbwalk.walk_weight_g("SLS", "a", a, b) == a * b**2
    assert nbwalk.walk_weight_g("SLRSSL", "a", a, b) == a**4 * b**2
    assert nbwalk.class_string("SLRSSL") == "abaaab"


def test_walks_never_backtrack():
    for w in nbwalk.all_walks(6):
        pts = nbwalk.walk_to_points(w)
        assert all(p != q for p, q in zip(pts, pts[2:]))
    assert sum(1 for _ in nbwalk.all_walks(6)) == 3**5


def test_small_values():
    x, y = sympy.symbols("x y")
    assert sympy.expand(nbwalk.F_recurrence(1, x, y)) == x + y
    assert sympy.expand(nbwalk.F_recurrence(2, x, y)) == x**2 + 4 * x * y + y**2
    assert nbwalk.F_recurrence(8, 1, 1) == 4374


@pytest.mark.parametrize("n", range(1, 10))
def test_three_forms_agree_exactly(n):
    for x in GRID:
        for y in GRID:
            b = nbwalk.F_brute(n, x, y)
            assert b.preimages_ok
            assert b.walk_sum == b.bitstring_sum == nbwalk.F_recurrence(n, x, y) == nbwalk.F_closed_form(n, x, y)


def test_walk_sum_against_direct_enumeration():
    # sum g_x + g_y walk by walk, no grouping
    x, y = Fraction(2), Fraction(3, 7)
    for n in range(1, 8):
        direct = sum(nbwalk.walk_weight_g(w, "a", x, y) + nbwalk.walk_weight_g(w, "a", y, x) for w in nbwalk.all_walks(n))
        assert direct == nbwalk.F_brute(n, x, y).walk_sum


def test_all_ones():
    assert all(nbwalk.F_recurrence(n, 1, 1) == 2 * 3 ** (n - 1) for n in range(1, 41))


@given(st.integers(1, 60), st.floats(0.01, 50), st.floats(0.01, 50))
def test_upper_bound(n, x, y):
    assert nbwalk.log_F_closed_form(n, x, y) <= nbwalk.log_F_upper_bound(n, x, y) + 1e-12


@given(st.integers(1, 30), st.floats(0.05, 5), st.floats(0.05, 5))
def test_float_closed_form_matches_recurrence(n, x, y):
    assert nbwalk.F_closed_form(n, x, y) == pytest.approx(nbwalk.F_recurrence(n, x, y), rel=1e-10)


@given(st.floats(0.05, 5), st.floats(0.05, 5))
def test_eigendecomposition(x, y):
    P, D = nbwalk.eigendecomposition(x, y)
    A = nbwalk.system_matrix(x, y)
    assert np.allclose(P @ D @ np.linalg.inv(P), A, rtol=1e-9, atol=1e-9)


def test_asymptotic_tightness():
    x, y = 0.7, 1.9
    r = math.exp(nbwalk.log_F_closed_form(400, x, y) - nbwalk.log_F_upper_bound(400, x, y))
    assert r == pytest.approx(nbwalk.asymptotic_tightness(x, y), rel=1e-9)


@given(st.floats(0.01, 10), st.floats(0.01, 10), st.floats(0.01, 30))
def test_afe_implication(a, b, c):
    cond = nbwalk.afe_condition(a, b, c)
    assert cond.implication_holds


def test_decay_base_equality_case():
    for a in (0.1, 1.0, 7.0):
        assert nbwalk.decay_base(a, a, 3 * a) == pytest.approx(1.0, abs=1e-12)
    assert nbwalk.decay_base(1, 1, 8) == pytest.approx(0.375)


def test_peierls_rate_requires_afe():
    with pytest.raises(ValueError):
        nbwalk.peierls_rate(1, 1, 1.5, 10)
    assert nbwalk.peierls_rate(1, 1, 8, 8).rate == pytest.approx(0.375**8)
