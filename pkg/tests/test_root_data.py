from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from wondercount.root_data import CartanType, CartanTypeError, build_root_datum, pairing

from oracles import kappa_oracle

TYPES = [("A", r) for r in range(1, 9)] + [("B", 2), ("B", 3), ("B", 4), ("C", 3), ("D", 4),
                                           ("G", 2), ("F", 4), ("E", 6), ("E", 7), ("E", 8)]


@pytest.mark.parametrize("family,rank", TYPES)
def test_kappa_matches_root_string_oracle(family, rank):
    rd = build_root_datum(CartanType(family, rank))
    kappa, npos = kappa_oracle(family, rank)
    assert rd.kappa == kappa
    assert len(rd.positive_roots) == npos
    assert npos == (rd.cartan_type.dimension - rank) // 2


@pytest.mark.parametrize("family,rank", TYPES)
def test_root_datum_invariants(family, rank):
    rd = build_root_datum(f"{family}{rank}")
    assert all(k >= 1 for k in rd.kappa)
    assert all(c >= 0 for root in rd.positive_roots_simple for c in root)
    # 2rho in ambient coordinates equals sum kappa_i alpha_i
    expanded = tuple(sum(k * a[x] for k, a in zip(rd.kappa, rd.simple_roots))
                     for x in range(len(rd.simple_roots[0])))
    assert rd.two_rho == expanded
    A = rd.cartan_matrix
    assert all(A[i][i] == 2 for i in range(rank))
    assert all(A[i][j] <= 0 for i in range(rank) for j in range(rank) if i != j)


@pytest.mark.parametrize("family,rank", TYPES)
def test_fundamental_coweights_are_dual(family, rank):
    rd = build_root_datum(f"{family}{rank}")
    for i, a in enumerate(rd.simple_roots):
        for j, w in enumerate(rd.fundamental_coweights):
            assert sum(Fraction(x) * y for x, y in zip(a, w)) == int(i == j)


@pytest.mark.parametrize("r", range(1, 9))
def test_type_a_kappa_closed_form(r):
    rd = build_root_datum(CartanType("A", r))
    assert rd.kappa == tuple(i * (r + 1 - i) for i in range(1, r + 1))


@pytest.mark.parametrize("text,kappa", [("A1", (1,)), ("a2", (2, 2)), ("A3", (3, 4, 3))])
def test_spec_examples(text, kappa):
    assert build_root_datum(text).kappa == kappa


def test_g2_bourbaki_order():
    # alpha_1 short, alpha_2 long: 2rho = 10 alpha_1 + 6 alpha_2
    assert build_root_datum("G2").kappa == (10, 6)


@pytest.mark.parametrize("bad", ["G3", "E5", "F2", "D2", "B1", "X2", "A0", "A", ""])
def test_inconsistent_types_rejected(bad):
    with pytest.raises(CartanTypeError):
        CartanType.parse(bad)


def test_pairing_examples():
    assert pairing((2, 2), (0, 0)) == 0
    assert pairing((2, 3), (1, 1)) == 5
    assert pairing(build_root_datum("A3").kappa, (1, 1, 1)) == 10
    assert pairing((Fraction(1, 3), 2), (3, Fraction(1, 2))) == 2
    with pytest.raises(ValueError):
        pairing((1, 2), (1,))


@given(st.lists(st.fractions(max_denominator=50), min_size=1, max_size=6),
       st.lists(st.fractions(max_denominator=50), min_size=6, max_size=6))
def test_pairing_is_exact_and_bilinear(u, v):
    v = v[:len(u)]
    assert pairing(u, v) == sum(x * y for x, y in zip(u, v))
    assert pairing([2 * x for x in u], v) == 2 * pairing(u, v)
