"""Exhaustive counting of PGL_n(Q)-points of bounded height.

The search domain is a box in entry space whose side comes from a proven
lower bound for the height.  For primitive M and lambda with smallest
coefficient m,

    H(lambda, M)^(1/m) >= (sigma_1/sigma_n) * d_n >= sigma_1^(n/(n-1)),

because d_n^(n-1) >= |det M| (d_1 = 1) and sigma_n^(n-1) <= |det M|/sigma_1.
Every entry is at most sigma_1, so all points of height <= B have entries
bounded by B^((n-1)/(n m)).

n = 2, 3 run in compiled kernels; any n also runs on the reference path,
which evaluates every height with the exact Smith form and mpmath.
"""

from __future__ import annotations

import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from math import gcd
from typing import Iterator, Sequence

import mpmath
import numpy as np

from wondercount.geometry import DivisorChoice, PicClass, PlaceSet
from wondercount.heights import GroupPoint, delta_indicator, global_height, int_det

log = logging.getLogger(__name__)

#: decimal digits kept when a height is compared with a grid value
BOUNDARY_DIGITS = 30


class BudgetExceeded(RuntimeError):
    def __init__(self, estimate: float, budget: float):
        super().__init__(f"estimated {estimate:.3g} candidate matrices exceeds the budget of {budget:.3g}")
        self.estimate = estimate
        self.budget = budget


def geometric_grid(bmin: float, bmax: float, points: int) -> list[float]:
    if points < 2 or not 0 < bmin < bmax:
        raise ValueError("need 0 < bmin < bmax and at least two points")
    return [float(x) for x in np.geomspace(bmin, bmax, points)]


def _exact_exponent(n: int, m: Fraction) -> Fraction:
    # sigma_1^(n m/(n-1)) <= H
    return Fraction(n) * m / (n - 1)


def sigma1_bound(n: int, lam: PicClass, B: float) -> float:
    """Upper bound for sigma_1 of any point with H(lambda, .) <= B."""
    m = min(lam.coeffs)
    if m <= 0:
        raise ValueError("class is not big")
    if B < 1:
        return 0.0
    return float(B) ** (1 / float(_exact_exponent(n, m)))


def entry_bound(n: int, lam: PicClass, B: float) -> int:
    """Largest k with k^(n m/(n-1)) <= B; at least 1."""
    if not lam.is_big:
        raise ValueError(f"class ({lam}) is not big")
    e = _exact_exponent(n, min(lam.coeffs))
    Bq = Fraction(B)

    def fits(k: int) -> bool:
        # k^(p/q) <= B  <=>  k^p <= B^q
        return Fraction(k) ** e.numerator <= Bq ** e.denominator

    k = max(1, int(sigma1_bound(n, lam, B)))
    while k > 1 and not fits(k):
        k -= 1
    while fits(k + 1):
        k += 1
    return k


def is_canonical_row(row: Sequence[int]) -> bool:
    first = next((x for x in row if x), 0)
    return first > 0


def enumerate_points(n: int, bound: int) -> Iterator[GroupPoint]:
    """Primitive nonsingular sign-canonical matrices with entries in [-bound, bound].

    Lexicographic order on the row-major entries; each class appears once.
    """
    if bound < 1:
        return
    rng = range(-bound, bound + 1)
    for entries in product(rng, repeat=n * n):
        if not is_canonical_row(entries[:n]):
            continue
        g = 0
        for x in entries:
            g = gcd(g, x)
        if g != 1:
            continue
        rows = tuple(entries[i * n:(i + 1) * n] for i in range(n))
        if int_det(rows) == 0:
            continue
        yield GroupPoint(rows)


@dataclass
class CountJob:
    n: int
    lam: PicClass
    D: DivisorChoice
    S: PlaceSet
    B_grid: list[float]
    entry_bound: int | None = None
    workers: int = 1
    prune: bool = True
    engine: str = "auto"
    budget: float = math.inf

    def __post_init__(self):
        self.B_grid = [float(b) for b in self.B_grid]
        if not self.B_grid or any(b <= 0 for b in self.B_grid):
            raise ValueError("grid must be a nonempty list of positive numbers")
        if any(x >= y for x, y in zip(self.B_grid, self.B_grid[1:])):
            raise ValueError("grid must be strictly increasing")
        if len(self.lam) != self.n - 1:
            raise ValueError(f"PGL_{self.n} needs a class with {self.n - 1} coefficients")
        if not self.lam.is_big:
            raise ValueError("class is not big")
        self.D.check_rank(self.n - 1)
        needed = entry_bound(self.n, self.lam, self.B_grid[-1])
        if self.entry_bound is None:
            self.entry_bound = needed
        elif self.entry_bound < needed:
            raise ValueError(
                f"entry bound {self.entry_bound} is below the completeness bound {needed} "
                f"for B = {self.B_grid[-1]:g}"
            )


@dataclass
class CountResult:
    rows: list[tuple[float, int, int]]
    job: CountJob | None = None
    wall_time: float = 0.0
    workers: int = 1
    candidates: int = 0
    flagged: int = 0
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_counts(cls, B: Sequence[float], N: Sequence[int], N_rational: Sequence[int] | None = None):
        Nr = N if N_rational is None else N_rational
        return cls(rows=[(float(b), x, y) for b, x, y in zip(B, N, Nr)])

    @property
    def B(self) -> np.ndarray:
        return np.array([r[0] for r in self.rows])

    @property
    def N_integral(self) -> np.ndarray:
        return np.array([r[1] for r in self.rows])

    @property
    def N_rational(self) -> np.ndarray:
        return np.array([r[2] for r in self.rows])


def _boundary_leq(h, B: float) -> bool:
    """H <= B after rounding H to BOUNDARY_DIGITS significant digits (nearest)."""
    with mpmath.workdps(BOUNDARY_DIGITS):
        return +h <= mpmath.mpf(B)


def _canonical_first_rows(n: int, bound: int, sigma1_sq_max: float | None) -> np.ndarray:
    rows = []
    for r in product(range(-bound, bound + 1), repeat=n):
        if not is_canonical_row(r):
            continue
        if sigma1_sq_max is not None and sum(x * x for x in r) > sigma1_sq_max:
            continue
        rows.append(r)
    return np.array(rows, dtype=np.int64).reshape(-1, n)


def _config_arrays(n: int, configs: Sequence[tuple[DivisorChoice, PlaceSet]]):
    kmax = max([len(S.finite_primes) for _, S in configs] + [1]) + 1
    dmask = np.zeros((len(configs), n - 1), dtype=np.int64)
    sprimes = np.zeros((len(configs), kmax), dtype=np.int64)
    for t, (D, S) in enumerate(configs):
        for i in D.in_d:
            dmask[t, i] = 1
        for k, p in enumerate(sorted(S.finite_primes)):
            sprimes[t, k] = p
    return dmask, sprimes


@dataclass(frozen=True)
class _Plan:
    n: int
    bound: int
    lam: tuple[float, ...]
    log_grid: np.ndarray
    sigma1_sq_max: float
    t_sq_max: float
    prune: bool
    dmask: np.ndarray
    sprimes: np.ndarray


def _run_shard(plan: _Plan, first_rows: np.ndarray, cap: int = 100_000):
    from wondercount import _kernels

    while True:
        buf = np.zeros((cap, plan.n * plan.n), dtype=np.int64)
        if plan.n == 2:
            hist, nflag, visited = _kernels.count_pgl2(
                first_rows, plan.bound, plan.sigma1_sq_max, plan.prune, plan.lam[0],
                plan.log_grid, plan.dmask, plan.sprimes, buf)
        else:
            hist, nflag, visited = _kernels.count_pgl3(
                first_rows, plan.bound, plan.sigma1_sq_max, plan.t_sq_max, plan.prune,
                np.array(plan.lam), plan.log_grid, plan.dmask, plan.sprimes, buf)
        if nflag <= cap:
            return hist, buf[:nflag].copy(), int(visited)
        cap = 2 * nflag


def estimate_candidates(n: int, lam: PicClass, B: float, bound: int | None = None,
                        prune: bool = True) -> float:
    """Rough number of matrices the box enumeration will visit."""
    bound = entry_bound(n, lam, B) if bound is None else bound
    if not prune:
        return (2 * bound + 1) ** (n * n) / 2
    R = min(sigma1_bound(n, lam, B), bound)
    # lattice points in a ball of radius R in dimension n
    ball = math.pi ** (n / 2) / math.gamma(n / 2 + 1) * (R + 0.5) ** n
    if n != 3:
        return ball**n / 2
    T = float(B) ** (1 / float(min(lam.coeffs)))
    rng = np.random.default_rng(0)
    r = int(R)
    pts = rng.integers(-r, r + 1, size=(20000, 2, 3))
    n1 = (pts[:, 0] ** 2).sum(1)
    n2 = (pts[:, 1] ** 2).sum(1)
    inside = (n1 <= R * R) & (n2 <= R * R)
    cr = np.cross(pts[:, 0], pts[:, 1])
    g = np.gcd.reduce(np.abs(cr), axis=1)
    ok = inside & (g > 0)
    surv = ok & (np.maximum(n1, n2) * (cr**2).sum(1) <= T * T * g.astype(float) ** 2)
    frac = max(surv.sum(), 1) / max(inside.sum(), 1)
    return ball**3 * frac / 2


def count_configs(n: int, lam: PicClass, B_grid: Sequence[float],
                  configs: Sequence[tuple[DivisorChoice, PlaceSet]], *, bound: int | None = None,
                  workers: int = 1, prune: bool = True, engine: str = "auto",
                  budget: float = math.inf, chunks: int | None = None) -> list[CountResult]:
    """Count points for several integrality conditions in a single enumeration.

    Every result carries the same rational counts; the integral counts differ
    by (D, S).
    """
    configs = list(configs)
    jobs = [CountJob(n, lam, D, S, list(B_grid), bound, workers, prune, engine, budget)
            for D, S in configs]
    bound = jobs[0].entry_bound
    grid = jobs[0].B_grid
    if engine == "auto":
        engine = "kernel" if n in (2, 3) else "python"
    if engine == "kernel" and n not in (2, 3):
        raise ValueError("compiled kernels exist for n = 2 and 3 only")
    est = estimate_candidates(n, lam, grid[-1], bound, prune)
    if est > budget:
        raise BudgetExceeded(est, budget)

    all_configs = [(DivisorChoice(), PlaceSet())] + configs
    t0 = time.perf_counter()
    if engine == "python":
        hist, visited, flagged = _count_python(n, lam, grid, all_configs, bound, prune)
    else:
        hist, visited, flagged = _count_kernel(n, lam, grid, all_configs, bound, prune, workers, chunks)
    wall = time.perf_counter() - t0
    cum = np.cumsum(hist, axis=1)
    out = []
    for t, job in enumerate(jobs, start=1):
        rows = [(b, int(cum[t, j]), int(cum[0, j])) for j, b in enumerate(grid)]
        out.append(CountResult(rows=rows, job=job, wall_time=wall, workers=workers,
                               candidates=visited, flagged=flagged,
                               meta={"engine": engine, "entry_bound": bound}))
    return out


def count(job: CountJob) -> CountResult:
    """N_{S,D}(B, lambda) and the rational-point count on every grid value."""
    return count_configs(job.n, job.lam, job.B_grid, [(job.D, job.S)], bound=job.entry_bound,
                         workers=job.workers, prune=job.prune, engine=job.engine,
                         budget=job.budget)[0]


def _resolve_flagged(pts: np.ndarray, n: int, lam: PicClass, grid, configs, hist):
    for flat in sorted(map(tuple, pts.tolist())):
        P = GroupPoint(tuple(tuple(flat[i * n:(i + 1) * n]) for i in range(n)))
        h = global_height(P, lam).total
        j = next((j for j, b in enumerate(grid) if _boundary_leq(h, b)), None)
        if j is None:
            continue
        for t, (D, S) in enumerate(configs):
            if delta_indicator(P, D, S):
                hist[t, j] += 1


def _count_kernel(n, lam, grid, configs, bound, prune, workers, chunks):
    sigma_max = sigma1_bound(n, lam, grid[-1])
    s1sq = sigma_max**2 * (1 + 1e-9) + 1e-9
    T = float(grid[-1]) ** (1 / float(min(lam.coeffs)))
    dmask, sprimes = _config_arrays(n, configs)
    plan = _Plan(n=n, bound=bound, lam=tuple(float(c) for c in lam.coeffs),
                 log_grid=np.log(np.array(grid, dtype=np.float64)),
                 sigma1_sq_max=s1sq if prune else float((2 * bound + 1) ** 2 * n * n),
                 t_sq_max=T * T * (1 + 1e-9), prune=prune, dmask=dmask, sprimes=sprimes)
    first = _canonical_first_rows(n, bound, s1sq if prune else None)
    nchunks = chunks or max(1, min(len(first), 8 * max(1, workers)))
    shards = [first[i::nchunks] for i in range(nchunks)]
    hist = np.zeros((len(configs), len(grid)), dtype=np.int64)
    flagged, visited = [], 0
    if workers <= 1:
        results = map(lambda s: _run_shard(plan, s), shards)
        results = list(results)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_shard, [plan] * len(shards), shards))
    for h, f, v in results:
        hist += h
        flagged.append(f)
        visited += v
    flagged = np.concatenate(flagged) if flagged else np.zeros((0, n * n), dtype=np.int64)
    _resolve_flagged(flagged, n, lam, grid, configs, hist)
    log.info("visited %d candidates, %d near-boundary points resolved", visited, len(flagged))
    return hist, visited, len(flagged)


def _count_python(n, lam, grid, configs, bound, prune):
    hist = np.zeros((len(configs), len(grid)), dtype=np.int64)
    sigma_max = sigma1_bound(n, lam, grid[-1]) * (1 + 1e-9)
    visited = 0
    for P in enumerate_points(n, bound):
        visited += 1
        if prune and max(sum(x * x for x in r) for r in P.matrix) > sigma_max**2:
            continue
        h = global_height(P, lam).total
        j = next((j for j, b in enumerate(grid) if _boundary_leq(h, b)), None)
        if j is None:
            continue
        for t, (D, S) in enumerate(configs):
            if delta_indicator(P, D, S):
                hist[t, j] += 1
    return hist, visited, 0


def fit_exponents(result: CountResult, predicted_a, predicted_b: int | None = None,
                  use: str = "integral", b_window: int | None = None):
    """Least-squares exponents (a_hat, b_hat, c_hat) of N(B) ~ c B^a log(B)^(b-1).

    a_hat is the log-log slope over the top half of the grid after dividing
    out log(B)^(b-1) for the predicted b; without a predicted b, log N is
    regressed on log B and log log B jointly.  Both reduce to the plain
    slope when b = 1, and a pure log factor no longer biases a_hat by
    (b-1)/log B.  b_hat - 1 is
    the slope of log(N B^-a) against log log B with the predicted a, over the
    top ``b_window`` points (default: top half).  c_hat uses the last grid
    value with the predicted a and b (b_hat rounded when b is not given).
    """
    B = result.B.astype(float)
    N = (result.N_integral if use == "integral" else result.N_rational).astype(float)
    if len(B) < 8:
        raise ValueError("need at least 8 grid points")
    if B[-1] / B[0] < 1e3 * (1 - 1e-12):
        raise ValueError("grid must span at least three decades")
    if B[0] <= 1:
        raise ValueError("grid values must exceed 1 to fit log-powers")
    half = len(B) // 2
    top = slice(len(B) - max(half, 2), None)
    if np.any(N[top] <= 0):
        raise ValueError("counts in the fitting window must be positive")
    a = float(predicted_a)
    lb, ln = np.log(B[top]), np.log(N[top])
    if predicted_b is not None:
        a_hat = float(np.polyfit(lb, ln - (predicted_b - 1) * np.log(lb), 1)[0])
    else:
        X = np.column_stack([np.ones_like(lb), lb, np.log(lb)])
        a_hat = float(np.linalg.lstsq(X, ln, rcond=None)[0][1])
    win = slice(len(B) - (b_window or max(half, 2)), None)
    if np.any(N[win] <= 0):
        raise ValueError("counts in the fitting window must be positive")
    slope = float(np.polyfit(np.log(np.log(B[win])), np.log(N[win]) - a * np.log(B[win]), 1)[0])
    b_hat = slope + 1
    b = predicted_b if predicted_b is not None else max(1, round(b_hat))
    c_hat = float(N[-1] / (B[-1] ** a * math.log(B[-1]) ** (b - 1)))
    return a_hat, b_hat, c_hat
