import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_force_points
from wondercount import _kernels
from wondercount.enumeration import (
    BudgetExceeded, CountJob, CountResult, count, count_configs, entry_bound,
    enumerate_points, fit_exponents, geometric_grid,
)
from wondercount.geometry import DivisorChoice, PicClass, PlaceSet
from wondercount.heights import GroupPoint, global_height, delta_indicator

L2 = PicClass((2,))
FULL1 = DivisorChoice.full(1)


@pytest.mark.parametrize("n,lam,B,expected", [
    (2, (2,), 16, 2),
    (2, (1,), 100, 10),
    (2, (2,), 1, 1),
    (3, (3, 3), 1, 1),
])
def test_entry_bound_examples(n, lam, B, expected):
    assert entry_bound(n, PicClass(lam), B) == expected


def test_entry_bound_rejects_non_big():
    with pytest.raises(ValueError):
        entry_bound(2, PicClass((0,)), 10)


@given(st.integers(1, 10**6), st.sampled_from([(1,), (2,), (Fraction(3, 2),)]))
def test_entry_bound_is_tight(B, lam):
    lam = PicClass(lam)
    k = entry_bound(2, lam, B)
    e = 2 * min(lam.coeffs)
    assert Fraction(k) ** e <= B or k == 1
    assert Fraction(k + 1) ** e > B


def test_enumerate_points_matches_oracle():
    got = [sum(P.matrix, ()) for P in enumerate_points(2, 1)]
    assert got == brute_force_points(2, 1)
    assert len(got) == len(set(got))


def test_enumerate_points_empty_and_no_sign_pairs():
    assert list(enumerate_points(2, 0)) == []
    seen = {sum(P.matrix, ()) for P in enumerate_points(2, 2)}
    assert all(tuple(-x for x in m) not in seen for m in seen)


def test_count_b1_gives_four():
    r = count(CountJob(2, L2, FULL1, PlaceSet(), [1.0]))
    assert r.rows[0][1] == 4


def _oracle_count(n, lam, D, S, B, bound):
    ni = nr = 0
    for entries in brute_force_points(n, bound):
        P = GroupPoint(tuple(tuple(entries[i * n:(i + 1) * n]) for i in range(n)))
        if global_height(P, lam).total <= B:
            nr += 1
            ni += delta_indicator(P, D, S)
    return ni, nr


def test_count_b16_matches_oracle():
    r = count(CountJob(2, L2, FULL1, PlaceSet(), [16.0]))
    assert r.rows[0][1:] == _oracle_count(2, L2, FULL1, PlaceSet(), 16, 2)


def test_count_monotone_and_subsum():
    grid = geometric_grid(10, 1e4, 7)
    for D, S in [(FULL1, PlaceSet()), (FULL1, PlaceSet({2})), (DivisorChoice(), PlaceSet())]:
        r = count(CountJob(2, L2, D, S, grid))
        assert np.all(np.diff(r.N_integral) >= 0)
        assert np.all(r.N_integral <= r.N_rational)
        if not D.in_d:
            assert np.array_equal(r.N_integral, r.N_rational)


def test_count_refuses_small_entry_bound():
    with pytest.raises(ValueError, match="completeness"):
        CountJob(2, L2, FULL1, PlaceSet(), [1e4], entry_bound=3)


def test_budget_refusal():
    with pytest.raises(BudgetExceeded) as exc:
        count(CountJob(3, PicClass((3, 3)), DivisorChoice(), PlaceSet(), [1e9], budget=1e6))
    assert exc.value.estimate > 1e6


@pytest.mark.parametrize("B", [100.0, 1e3, 1e4])
def test_completeness_with_larger_box(B):
    grid = geometric_grid(2, B, 6)
    k = entry_bound(2, L2, B)
    a = count(CountJob(2, L2, FULL1, PlaceSet({3}), grid))
    b = count(CountJob(2, L2, FULL1, PlaceSet({3}), grid, entry_bound=k + 5))
    assert a.rows == b.rows


@pytest.mark.parametrize("lam,bmax", [((2,), 1e4), ((1,), 1e3), ((Fraction(5, 2),), 1e4)])
def test_pruning_soundness_pgl2(lam, bmax):
    lam = PicClass(lam)
    grid = geometric_grid(2, bmax, 9)
    cfg = [(FULL1, PlaceSet()), (FULL1, PlaceSet({2, 5}))]
    a = count_configs(2, lam, grid, cfg, prune=True)
    b = count_configs(2, lam, grid, cfg, prune=False)
    assert [x.rows for x in a] == [x.rows for x in b]


@pytest.mark.parametrize("lam", [(3, 3), (2, 2), (2, 5)])
def test_pruning_soundness_pgl3(lam):
    lam = PicClass(lam)
    grid = geometric_grid(2, 20, 5)
    cfg = [(DivisorChoice.full(2), PlaceSet()), (DivisorChoice({0}), PlaceSet({2}))]
    bound = entry_bound(3, lam, grid[-1])
    a = count_configs(3, lam, grid, cfg, prune=True)
    b = count_configs(3, lam, grid, cfg, prune=False, bound=bound)
    assert [x.rows for x in a] == [x.rows for x in b]


def test_kernel_matches_reference_pgl2():
    grid = geometric_grid(2, 300, 6)
    cfg = [(FULL1, PlaceSet()), (FULL1, PlaceSet({2}))]
    a = count_configs(2, L2, grid, cfg, engine="kernel")
    b = count_configs(2, L2, grid, cfg, engine="python")
    assert [x.rows for x in a] == [x.rows for x in b]


# bound 1 is complete while B < 2^(3m/2), m the smallest coefficient
@pytest.mark.parametrize("lam,grid", [
    ((3, 3), [1.0, 3.0, 10.0, 22.0]),
    ((2, 2), [1.0, 3.0, 7.9]),
    ((2, 5), [1.0, 4.0, 7.9]),
])
def test_kernel_matches_reference_pgl3(lam, grid):
    lam = PicClass(lam)
    cfg = [(DivisorChoice.full(2), PlaceSet()), (DivisorChoice({1}), PlaceSet({2})),
           (DivisorChoice({0}), PlaceSet({3}))]
    a = count_configs(3, lam, grid, cfg, engine="kernel", bound=1)
    b = count_configs(3, lam, grid, cfg, engine="python", bound=1)
    assert [x.rows for x in a] == [x.rows for x in b]


def test_pgl3_height_kernel_against_exact():
    rng = random.Random(7)
    for _ in range(200):
        while True:
            M = [[rng.randint(-9, 9) for _ in range(3)] for _ in range(3)]
            try:
                P = GroupPoint.from_matrix(M)
                break
            except ValueError:
                continue
        lam = PicClass((rng.randint(1, 4), rng.randint(1, 4)))
        exact = float(global_height(P, lam).total)
        fast = _kernels.pgl3_log_height(np.array(P.matrix, dtype=np.int64),
                                        float(lam.coeffs[0]), float(lam.coeffs[1]))
        assert fast == pytest.approx(math.log(exact), abs=1e-9)


def test_determinism_across_workers():
    grid = geometric_grid(10, 1e5, 8)
    cfg = [(FULL1, PlaceSet()), (FULL1, PlaceSet({2, 3}))]
    runs = [count_configs(2, L2, grid, cfg, workers=w) for w in (1, 2, 8)]
    assert runs[0][0].rows == runs[1][0].rows == runs[2][0].rows
    assert runs[0][1].rows == runs[1][1].rows == runs[2][1].rows


def test_fit_exact_power_law():
    B = geometric_grid(10, 1e6, 12)
    a, b, c = fit_exponents(CountResult.from_counts(B, [7 * x for x in B]), 1)
    assert a == pytest.approx(1)
    assert b == pytest.approx(1, abs=1e-9)
    assert c == pytest.approx(7)


def test_fit_log_power():
    B = geometric_grid(1e3, 1e9, 25)
    N = [2 * math.sqrt(x) * math.log(x) for x in B]
    a, b, c = fit_exponents(CountResult.from_counts(B, N), Fraction(1, 2))
    assert abs(a - 0.5) <= 0.02
    assert abs(b - 2) <= 0.1
    assert c == pytest.approx(2)


@pytest.mark.parametrize("B", [
    geometric_grid(10, 1e6, 7),
    geometric_grid(10, 1e2, 10),
    geometric_grid(0.5, 1e6, 10),
])
def test_fit_degenerate_grid(B):
    with pytest.raises(ValueError):
        fit_exponents(CountResult.from_counts(B, [x for x in B]), 1)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 2000))
def test_counts_nested_across_s(B):
    cfg = [(FULL1, PlaceSet()), (FULL1, PlaceSet({2})), (FULL1, PlaceSet({2, 3}))]
    res = count_configs(2, L2, [float(B)], cfg)
    n = [r.rows[0][1] for r in res]
    assert n[0] <= n[1] <= n[2] <= res[0].rows[0][2]
