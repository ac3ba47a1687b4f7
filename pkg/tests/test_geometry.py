from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from wondercount.geometry import (
    DivisorChoice, PicClass, PlaceSet, UnsupportedFieldError, anticanonical,
    character_group_order, invariants, log_anticanonical, parse_divisor, parse_lambda,
    parse_places,
)
from wondercount.root_data import build_root_datum

A1, A2, A3 = (build_root_datum(t) for t in ("A1", "A2", "A3"))
NONE = DivisorChoice()


def test_anticanonical_examples():
    assert anticanonical(A1).coeffs == (2,)
    assert anticanonical(A2).coeffs == (3, 3)
    assert anticanonical(A3).coeffs == (4, 5, 4)


def test_log_anticanonical_examples():
    assert log_anticanonical(A2, NONE).coeffs == (3, 3)
    assert log_anticanonical(A2, DivisorChoice.full(2)).coeffs == (2, 2)
    assert log_anticanonical(A2, DivisorChoice({0})).coeffs == (2, 3)


def test_invariants_anticanonical_a2():
    inv = invariants(A2, PicClass((3, 3)), NONE, PlaceSet())
    assert (inv.a, inv.A_lambda, inv.r_lambda, inv.d_lambda, inv.b) == (1, {0, 1}, 2, 0, 2)


def test_invariants_full_boundary_three_places():
    inv = invariants(A2, PicClass((2, 2)), DivisorChoice.full(2), PlaceSet({2, 3}))
    assert inv.a == 1 and inv.d_lambda == 2 and inv.b == 6


def test_invariants_mixed_divisor():
    inv = invariants(A2, PicClass((2, 3)), DivisorChoice({0}), PlaceSet({5}))
    assert inv.a == 1 and inv.A_lambda == {0, 1}
    assert (inv.r_lambda, inv.d_lambda, inv.b) == (2, 1, 3)


def test_invariants_exact_ties():
    # (kappa+1)/lambda = 3/(3/2) = 2 and kappa/lambda = 2/1 = 2 tie exactly
    inv = invariants(A2, PicClass((1, Fraction(3, 2))), DivisorChoice({0}), PlaceSet())
    assert inv.a == 2 and inv.A_lambda == {0, 1}


def test_non_big_rejected():
    with pytest.raises(ValueError):
        invariants(A2, PicClass((0, 3)), NONE, PlaceSet())
    with pytest.raises(ValueError):
        invariants(A2, PicClass((3,)), NONE, PlaceSet())


def test_pgl2_boundary_invariants():
    full = DivisorChoice.full(1)
    inv = invariants(A1, PicClass((2,)), full, PlaceSet())
    assert (inv.a, inv.b) == (Fraction(1, 2), 1)
    assert invariants(A1, PicClass((2,)), full, PlaceSet({2})).b == 2
    assert invariants(A1, PicClass((2,)), NONE, PlaceSet()).a == 1


subsets = st.sets(st.integers(0, 2))
positive = st.fractions(min_value=Fraction(1, 20), max_value=20, max_denominator=30)
primes = st.sets(st.sampled_from([2, 3, 5, 7, 11, 13]), max_size=4)


@given(st.lists(positive, min_size=3, max_size=3), subsets, primes,
       st.fractions(min_value=Fraction(1, 10), max_value=10, max_denominator=20))
def test_scale_equivariance(lam, D, S, t):
    D, S, lam = DivisorChoice(D), PlaceSet(S), PicClass(lam)
    base, scaled = invariants(A3, lam, D, S), invariants(A3, lam.scaled(t), D, S)
    assert scaled.a == base.a / t
    assert scaled.A_lambda == base.A_lambda and scaled.b == base.b


@given(subsets, primes)
def test_log_anticanonical_has_full_argmax(D, S):
    D, S = DivisorChoice(D), PlaceSet(S)
    inv = invariants(A3, log_anticanonical(A3, D), D, S)
    assert inv.a == 1 and inv.A_lambda == {0, 1, 2}
    assert inv.b == (3 - len(D.in_d)) + S.size * len(D.in_d)


@given(st.lists(positive, min_size=3, max_size=3), subsets, primes, st.sampled_from([17, 19, 23]))
def test_adding_a_prime_raises_b_by_d(lam, D, S, p):
    D, S, lam = DivisorChoice(D), PlaceSet(S), PicClass(lam)
    before, after = invariants(A3, lam, D, S), invariants(A3, lam, D, S.with_prime(p))
    assert after.b - before.b == before.d_lambda >= 0


def test_character_group():
    assert character_group_order("Q", NONE, anticanonical(A2), PlaceSet()) == 1
    assert character_group_order("Q", DivisorChoice.full(2), PicClass((5, 1)), PlaceSet({2})) == 1
    with pytest.raises(UnsupportedFieldError):
        character_group_order("Q(sqrt(-5))", NONE, anticanonical(A2), PlaceSet())


def test_parsers():
    assert parse_divisor("1,3", 3).in_d == {0, 2}
    assert parse_divisor("all", 2).in_d == {0, 1}
    assert parse_divisor("none", 2).in_d == set()
    with pytest.raises(ValueError):
        parse_divisor("4", 3)
    assert parse_lambda("2,3", A2, NONE).coeffs == (2, 3)
    assert parse_lambda("1/2, 3", A2, NONE).coeffs == (Fraction(1, 2), 3)
    assert parse_lambda("anticanonical", A2, NONE).coeffs == (3, 3)
    assert parse_lambda("log-anticanonical", A2, DivisorChoice.full(2)).coeffs == (2, 2)
    assert parse_places("inf,2,3").finite_primes == {2, 3}
    assert parse_places("inf").size == 1
    with pytest.raises(ValueError):
        parse_places("inf,4")
