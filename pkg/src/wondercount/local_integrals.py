"""Local height integrals for PGL_n and the leading constant of the count.

Finite places use vol(K_p) = 1, so the volume of a double coset K t(a) K is
the number of right cosets it contains.  Two exact routes are provided:
counting Hermite normal forms with the right Smith type, and the closed
form p^<2rho,a> W(1/p)/W_a(1/p) in terms of Poincare polynomials of S_n and
of the stabilizer of a.  The series code uses the closed form; the counting
route pins it down in the tests.

The real place uses the Cartan density prod_{i<j} 2 sinh(a_i + ... + a_{j-1})
in the coordinates a_k = log(sigma_k/sigma_{k+1}).  Its total mass is fixed
only up to one constant, which is calibrated against a count (see
``NORMALIZATION``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import Sequence

import mpmath
import numpy as np
from sympy import primerange

from wondercount.geometry import (
    DivisorChoice, PicClass, PlaceSet, character_group_order, invariants,
)
from wondercount.heights import smith_exponents
from wondercount.root_data import CartanType, build_root_datum

#: archimedean normalization per n, fitted to rational-point counts
NORMALIZATION = {
    2: (5.997334, "calibrate(2, (2,), 1e8, 303828464): PGL_2, D = none, lambda = (2), "
                  "exhaustive rational count at B = 1e8 (entry bound 100)"),
}

#: Richardson nodes for Laurent leading coefficients
EPSILONS = (0.04, 0.02, 0.01)


class SeriesError(ValueError):
    pass


class ExtrapolationError(ArithmeticError):
    def __init__(self, message, raw):
        super().__init__(f"{message}; raw values {raw}")
        self.raw = raw


def kappa(n: int) -> tuple[int, ...]:
    return build_root_datum(CartanType("A", n - 1)).kappa


def _cotype(a: Sequence[int]) -> tuple[int, ...]:
    e = [0]
    for x in a:
        e.append(e[-1] + x)
    return tuple(e)


# -- cell volumes -----------------------------------------------------------

def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for i in range(total + 1):
        for rest in _compositions(total - i, parts - 1):
            yield (i,) + rest


def cell_volume(n: int, p: int, a: Sequence[int]) -> int:
    """vol(K t(a) K) by counting Hermite normal forms of Smith type t(a).

    Each right coset is an upper-triangular matrix with diagonal p^c and
    entries above the diagonal reduced modulo their column's pivot.
    """
    a = tuple(int(x) for x in a)
    if len(a) != n - 1 or any(x < 0 for x in a):
        raise ValueError(f"need a vector of n-1 = {n - 1} nonnegative integers")
    target = _cotype(a)
    total = sum(target)
    if total == 0:
        return 1
    slots = [(i, j) for j in range(n) for i in range(j)]
    count = 0
    for diag in _compositions(total, n):
        ranges = [range(p ** diag[j]) for (_, j) in slots]
        for vals in product(*ranges):
            H = [[0] * n for _ in range(n)]
            for k in range(n):
                H[k][k] = p ** diag[k]
            for (i, j), v in zip(slots, vals):
                H[i][j] = v
            if smith_exponents(H, p) == target:
                count += 1
    return count


def _poincare(m: int, t: Fraction) -> Fraction:
    """Poincare polynomial of S_m at t: prod_{k<=m} (1 + t + ... + t^(k-1))."""
    out = Fraction(1)
    for k in range(1, m + 1):
        out *= sum((t**i for i in range(k)), Fraction(0))
    return out


def _zero_runs(zero: Sequence[bool]) -> list[int]:
    """Block sizes of the cotype: each run of vanishing a_i glues adjacent entries."""
    blocks, size = [], 1
    for z in zero:
        if z:
            size += 1
        else:
            blocks.append(size)
            size = 1
    blocks.append(size)
    return blocks


@lru_cache(maxsize=None)
def _shape_factor(n: int, p: int, zero: tuple[bool, ...]) -> Fraction:
    t = Fraction(1, p)
    den = Fraction(1)
    for m in _zero_runs(zero):
        den *= _poincare(m, t)
    return _poincare(n, t) / den


def cell_volume_formula(n: int, p: int, a: Sequence[int]) -> int:
    """Closed-form vol(K t(a) K) = p^<2rho,a> W(1/p) / W_a(1/p)."""
    a = tuple(int(x) for x in a)
    k = kappa(n)
    v = Fraction(p) ** sum(x * y for x, y in zip(k, a)) * _shape_factor(n, p, tuple(x == 0 for x in a))
    assert v.denominator == 1
    return int(v)


def volume_bound_constant(n: int, p: int) -> float:
    """Smallest C with vol <= p^<2rho,a> (1 + C/p) for every a."""
    return float((_poincare(n, Fraction(1, p)) - 1) * p)


# -- local series -----------------------------------------------------------

def _check_region(n, s, D):
    k = kappa(n)
    s = tuple(float(x) for x in s)
    if len(s) != n - 1:
        raise ValueError(f"s must have {n - 1} coordinates")
    bad = [i + 1 for i in range(n - 1) if i not in D and not s[i] > k[i]]
    if bad:
        raise SeriesError(f"s lies outside the convergence region: need s_i > kappa_i for i in {bad}")
    return s, k


def _geometric_coeffs(xs: Sequence[float], N: int) -> np.ndarray:
    """Coefficients g_0..g_N of prod_i x_i z / (1 - x_i z)."""
    g = np.zeros(N + 1)
    g[0] = 1.0
    for x in xs:
        powers = x ** np.arange(1, N + 1)
        h = np.zeros(N + 1)
        h[1:] = powers
        g = np.convolve(g, h)[: N + 1]
    return g


@dataclass(frozen=True)
class LocalFactor:
    p: int
    s: tuple[float, ...]
    D: DivisorChoice
    cutoff: int
    J: float
    f: float
    tail: float

    @property
    def f_tail(self) -> float:
        return self.tail * self.regularizer

    @property
    def regularizer(self) -> float:
        k = kappa(len(self.s) + 1)
        out = 1.0
        for i, (x, kk) in enumerate(zip(self.s, k)):
            if i not in self.D:
                out *= 1 - self.p ** -(x - kk)
        return out


def local_series(n: int, p: int, s: Sequence[float], D: DivisorChoice = DivisorChoice(),
                 cutoff: int | None = None, tol: float | None = None) -> LocalFactor:
    """Truncated J_p(s) = sum over a (a_i = 0 on D, sum a <= cutoff) of p^-<s,a> vol(a).

    The tail is bounded with vol(a) <= p^<2rho,a> W(1/p), summing the
    dominating geometric series exactly.  Without a cutoff, the smallest one
    with tail < tol * partial sum (tol defaults to 1e-8) is chosen.
    """
    s, k = _check_region(n, s, D)
    free = [i for i in range(n - 1) if i not in D]
    x = {i: p ** -(s[i] - k[i]) for i in free}
    wmax = float(_poincare(n, Fraction(1, p)))
    full = math.prod(1 / (1 - x[i]) for i in free)

    def evaluate(N):
        total = 0.0
        for support in product((False, True), repeat=len(free)):
            on = [i for i, b in zip(free, support) if b]
            zero = tuple(not (i in on) for i in range(n - 1))
            coeffs = _geometric_coeffs([x[i] for i in on], N)
            total += float(_shape_factor(n, p, zero)) * float(coeffs.sum())
        # the sum over all a of prod x^a is the product of 1/(1-x_i)
        dom_all = _geometric_coeffs_total(x, free, N)
        # plus a rounding allowance for the float sums
        tail = wmax * (max(full - dom_all, 0.0) + 16 * np.finfo(float).eps * full)
        return total, tail

    if cutoff is None:
        target = 1e-8 if tol is None else tol
        N = 8
        while True:
            J, tail = evaluate(N)
            if tail <= target * J or not free:
                break
            if N > 2_000_000:
                raise SeriesError("series converges too slowly for the requested precision")
            N *= 2
        cutoff = N
    else:
        J, tail = evaluate(int(cutoff))
        if tol is not None and tail > tol * J:
            raise SeriesError(f"cutoff {cutoff} too small: tail bound {tail:.3g} exceeds {tol:g} of the sum")
    reg = math.prod(1 - x[i] for i in free)
    return LocalFactor(p=p, s=s, D=D, cutoff=int(cutoff), J=float(J), f=float(J * reg), tail=float(tail))


def _geometric_coeffs_total(x, free, N):
    """sum_{|a| <= N} prod_i x_i^a_i over the free coordinates."""
    g = np.zeros(N + 1)
    g[0] = 1.0
    for i in free:
        h = x[i] ** np.arange(N + 1)
        g = np.convolve(g, h)[: N + 1]
    return float(g.sum())


def local_factor_exact(n: int, p, s: Sequence[float], D: DivisorChoice = DivisorChoice()):
    """J_p(s) summed in closed form; vectorized over an array of primes p.

    Grouping a by its support P gives
        J_p = sum_P W(1/p)/W_P(1/p) prod_{i in P} x_i/(1 - x_i),
    with x_i = p^-(s_i - kappa_i).
    """
    s, k = _check_region(n, s, D)
    parr = np.asarray(p, dtype=float)
    free = [i for i in range(n - 1) if i not in D]
    total = np.zeros_like(parr)
    for support in product((False, True), repeat=len(free)):
        on = [i for i, b in zip(free, support) if b]
        zero = tuple(i not in on for i in range(n - 1))
        shape = _shape_factor_float(n, parr, zero)
        term = shape
        for i in on:
            xi = parr ** -(s[i] - k[i])
            term = term * xi / (1 - xi)
        total = total + term
    return total if np.ndim(p) else float(total)


def _poincare_float(m, t):
    out = np.ones_like(t)
    for kk in range(1, m + 1):
        out = out * sum(t**i for i in range(kk))
    return out


def _shape_factor_float(n, parr, zero):
    t = 1.0 / parr
    den = np.ones_like(t)
    for m in _zero_runs(zero):
        den = den * _poincare_float(m, t)
    return _poincare_float(n, t) / den


def regularized_factor(n, p, s, D: DivisorChoice = DivisorChoice()):
    """f_p(s) = J_p(s) prod_{i not in D} (1 - p^-(s_i - kappa_i)); vectorized over p."""
    s, k = _check_region(n, s, D)
    parr = np.asarray(p, dtype=float)
    out = np.asarray(local_factor_exact(n, parr, s, D), dtype=float)
    for i in range(n - 1):
        if i not in D:
            out = out * (1 - parr ** -(s[i] - k[i]))
    return out if np.ndim(p) else float(out)


# -- Euler products ---------------------------------------------------------

@dataclass(frozen=True)
class EulerProduct:
    value: float
    lower: float
    upper: float
    p_max: int
    zeta_args: tuple[float, ...]
    zeta_values: tuple[float | None, ...]

    @property
    def total(self) -> float | None:
        """f-part times the zeta factors, or None if one of them sits at its pole."""
        if any(z is None for z in self.zeta_values):
            return None
        return self.value * math.prod(self.zeta_values)


def zeta_S(x: float, S: PlaceSet) -> float | None:
    """Partial zeta function with the Euler factors at S removed; None at the pole."""
    if x == 1:
        return None
    return float(mpmath.zeta(x)) * math.prod(1 - p ** -x for p in S.finite_primes)


#: constant in |f_p - 1| <= C p^(-3/2), used for the Euler product tail
TAIL_CONSTANT = 3.0


def euler_product(n: int, s: Sequence[float], D: DivisorChoice, S: PlaceSet,
                  p_max: int = 1_000_000) -> EulerProduct:
    """prod_{p not in S, p <= p_max} f_p(s) with an interval for the omitted primes."""
    if p_max < 50:
        raise ValueError("p_max must be at least 50")
    s, k = _check_region(n, s, D)
    primes = np.array([p for p in primerange(2, p_max + 1) if p not in S.finite_primes], dtype=float)
    f = regularized_factor(n, primes, s, D)
    logv = float(np.sum(np.log(f)))
    # sum_{m > P} m^(-3/2) <= 2/sqrt(P)
    slack = TAIL_CONSTANT * 2 / math.sqrt(p_max)
    value = math.exp(logv)
    args = tuple(s[i] - k[i] for i in range(n - 1) if i not in D)
    return EulerProduct(value=value, lower=value * math.exp(-slack), upper=value * math.exp(slack),
                        p_max=p_max, zeta_args=args, zeta_values=tuple(zeta_S(x, S) for x in args))


# -- archimedean integral ---------------------------------------------------

@dataclass(frozen=True)
class Quadrature:
    """Trapezoid rule in u = log(y) per coordinate, y = (s_i - kappa_i) a_i."""

    step: float = 0.125
    u_min: float = -36.0
    u_max: float = 4.3

    def refined(self, factor: int = 2) -> "Quadrature":
        return Quadrature(self.step / factor, self.u_min, self.u_max)

    def nodes(self) -> np.ndarray:
        return np.arange(self.u_min, self.u_max + self.step / 2, self.step)


def _sinh_density_reduced(a: list[np.ndarray], n: int) -> np.ndarray:
    """prod_{i<j} (1 - exp(-2 (a_i + ... + a_{j-1}))), the density divided by e^<2rho,a>."""
    out = np.ones(np.broadcast(*a).shape)
    for i in range(n - 1):
        acc = np.zeros_like(out)
        for j in range(i + 1, n):
            acc = acc + a[j - 1]
            out = out * -np.expm1(-2 * acc)
    return out


def arch_integral(n: int, s: Sequence[float], quadrature: Quadrature = Quadrature()) -> float:
    """Unnormalized integral of H_inf(s, g)^-1 over PGL_n(R) in KAK coordinates."""
    k = kappa(n)
    s = tuple(float(x) for x in s)
    if len(s) != n - 1:
        raise ValueError(f"s must have {n - 1} coordinates")
    rates = [x - kk for x, kk in zip(s, k)]
    if any(not r > 0 for r in rates):
        raise SeriesError("archimedean integral diverges: need s_i > kappa_i for every i")
    u = quadrature.nodes()
    y = np.exp(u)
    w1 = y * np.exp(-y) * quadrature.step  # dy = y du
    r = n - 1
    if r == 1:
        val = np.sum(w1 * _sinh_density_reduced([y / rates[0]], n))
    else:
        # sum over the first coordinate in slices to bound memory
        grids = np.meshgrid(*([y] * (r - 1)), indexing="ij")
        wrest = np.ones_like(grids[0])
        for g in grids:
            wrest = wrest * g * np.exp(-g) * quadrature.step
        val = 0.0
        for y0, wy0 in zip(y, w1):
            a = [np.full(grids[0].shape, y0 / rates[0])] + [g / rt for g, rt in zip(grids, rates[1:])]
            val += wy0 * float(np.sum(wrest * _sinh_density_reduced(a, n)))
    if not np.isfinite(val) or val <= 0:
        raise ArithmeticError("quadrature failed")
    return float(val) / math.prod(rates)


def arch_integral_exact(n: int, s: Sequence[float]) -> float:
    """Same integral via the expansion of the density into exponentials."""
    k = kappa(n)
    r = n - 1
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    total = 0.0
    for signs in product((1, -1), repeat=len(pairs)):
        c = [0] * r
        for (i, j), sg in zip(pairs, signs):
            for m in range(i, j):
                c[m] += sg
        term = math.prod(signs)
        for m in range(r):
            if not s[m] > c[m]:
                raise SeriesError("divergent exponential term")
            term /= s[m] - c[m]
        total += term
    return total


# -- leading constant -------------------------------------------------------

def richardson(fn, order: int, eps: Sequence[float] = EPSILONS, rtol: float = 1e-3):
    """Limit as e -> 0 of e^order fn(e) by quadratic extrapolation on three halving nodes."""
    e1, e2, e3 = eps
    raw = tuple(e**order * fn(e) for e in eps)
    if order == 0:
        return fn(0.0), raw
    g1, g2, g3 = raw
    quad = sum(
        g * math.prod((0 - eo) / (ei - eo) for eo in eps if eo != ei) for g, ei in zip(raw, eps)
    )
    lin = (g3 * (0 - e2) / (e3 - e2)) + (g2 * (0 - e3) / (e2 - e3))
    if not math.isfinite(quad) or abs(quad - lin) > rtol * abs(quad):
        raise ExtrapolationError("Richardson extrapolation did not settle", raw)
    return quad, raw


@dataclass
class ConstantReport:
    n: int
    lam: tuple[str, ...]
    D: str
    S: str
    a: Fraction
    b: int
    A_lambda: tuple[int, ...]
    r_lambda: int
    d_lambda: int
    char_group_order: int
    zeta_factors: dict
    euler_value: float
    euler_interval: tuple[float, float]
    arch_value: float
    arch_raw: tuple[float, ...]
    S_place_values: dict
    S_place_raw: dict
    leading_coefficient: float
    c_unnormalized: float
    normalization_calibration: float | None
    normalization_note: str
    c_predicted: float | None
    tau: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = dict(self.__dict__)
        out["a"] = str(self.a)
        return out


def predicted_constant(n: int, lam: PicClass, D: DivisorChoice, S: PlaceSet,
                       quadrature: Quadrature = Quadrature(), p_max: int = 1_000_000,
                       base_field: str = "Q") -> ConstantReport:
    """Leading constant c in N(B) ~ c B^a log(B)^(b-1) for PGL_n over Q.

    c = |X| / (a (b-1)!) * lim_{s->a} (s-a)^b int delta H(s lambda)^-1 dg, with
      * zeta_S(s lambda_i - kappa_i) for i off D, each simple pole contributing
        prod_{p in S}(1 - 1/p) / lambda_i,
      * the regularized Euler product over p not in S at s = a,
      * the full local integrals at the places of S, whose pole of order
        d(lambda) is removed by Richardson extrapolation,
    times the calibrated archimedean normalization.
    """
    rd = build_root_datum(CartanType("A", n - 1))
    inv = invariants(rd, lam, D, S)
    chars = character_group_order(base_field, D, lam, S)
    a = inv.a
    k = rd.kappa
    lam_f = [float(x) for x in lam.coeffs]
    s0 = [float(a * x) for x in lam.coeffs]
    lead = 1.0
    zeta_factors = {}
    for i in range(n - 1):
        if i in D:
            continue
        if i in inv.A_lambda:
            res = math.prod(1 - 1 / p for p in S.finite_primes) / lam_f[i]
            zeta_factors[str(i + 1)] = {"kind": "residue", "value": res}
        else:
            res = zeta_S(s0[i] - k[i], S)
            zeta_factors[str(i + 1)] = {"kind": "value", "value": res}
        lead *= res

    ep = euler_product(n, s0, D, S, p_max)
    lead *= ep.value

    d = inv.d_lambda
    none = DivisorChoice()

    def shifted(e):
        return [x + e * y for x, y in zip(s0, lam_f)]

    s_vals, s_raw = {}, {}
    for p in sorted(S.finite_primes):
        val, raw = richardson(lambda e: local_factor_exact(n, p, shifted(e), none), d)
        s_vals[str(p)], s_raw[str(p)] = val, raw
        lead *= val
    arch, arch_raw = richardson(lambda e: arch_integral(n, shifted(e), quadrature), d)
    lead *= arch

    c_un = chars * lead / (float(a) * math.factorial(inv.b - 1))
    norm = NORMALIZATION.get(n)
    c = c_un * norm[0] if norm else None
    note = norm[1] if norm else f"no calibration recorded for n = {n}; c is unavailable"

    tau = {}
    if lam.coeffs == tuple(kk if i in D else kk + 1 for i, kk in enumerate(k)):
        on = math.prod(1 / k[i] for i in D.in_d)
        off = math.prod(1 / (k[i] + 1) for i in range(n - 1) if i not in D)
        lim_S = ep.value * math.prod(zeta_factors[str(i + 1)]["value"] for i in range(n - 1) if i not in D)
        tau = {
            "tau_S": off * lim_S,
            "tau_max": {"inf": on * arch, **{str(p): on * v for p, v in s_vals.items()}},
        }
        tau["c_tau_formula_unnormalized"] = (
            chars * tau["tau_S"] * math.prod(tau["tau_max"].values()) / math.factorial(inv.b - 1)
        )

    return ConstantReport(
        n=n, lam=tuple(str(x) for x in lam.coeffs), D=str(D), S=str(S), a=a, b=inv.b,
        A_lambda=tuple(sorted(i + 1 for i in inv.A_lambda)), r_lambda=inv.r_lambda,
        d_lambda=d, char_group_order=chars, zeta_factors=zeta_factors,
        euler_value=ep.value, euler_interval=(ep.lower, ep.upper), arch_value=arch,
        arch_raw=arch_raw, S_place_values=s_vals, S_place_raw=s_raw,
        leading_coefficient=lead, c_unnormalized=c_un, normalization_calibration=norm[0] if norm else None,
        normalization_note=note, c_predicted=c, tau=tau,
    )


def calibrate(n: int, lam: PicClass, B: float, N: int, **kw) -> float:
    """Normalization that makes the prediction match an observed count N at B."""
    rep = predicted_constant(n, lam, DivisorChoice(), PlaceSet(), **kw)
    pred = rep.c_unnormalized * B ** float(rep.a) * math.log(B) ** (rep.b - 1)
    return N / pred
