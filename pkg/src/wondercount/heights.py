"""Adelic heights on PGL_n(Q).

A rational point is stored as a primitive integer matrix with its first
nonzero entry positive.  Its Cartan coordinates are read off from the Smith
form at each prime (a_i = e_{i+1} - e_i) and from the singular values at the
real place (a_i = log(sigma_i / sigma_{i+1})).  With K_p = PGL_n(Z_p) and
K_inf = PO(n) these are the dominant torus parts in the fundamental
coweight basis.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from math import gcd
from typing import Sequence, Union

import mpmath
from sympy import factorint, isprime

from wondercount.geometry import DivisorChoice, PicClass, PlaceSet

INF = "inf"
Place = Union[int, str]

#: working precision (decimal digits) for the real place
ARCH_DPS = 40


class SingularMatrixError(ValueError):
    pass


class HeightComputationError(ArithmeticError):
    pass


def int_det(M: Sequence[Sequence[int]]) -> int:
    """Exact determinant by fraction-free (Bareiss) elimination."""
    A = [list(map(int, row)) for row in M]
    n = len(A)
    sign, prev = 1, 1
    for k in range(n - 1):
        if A[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if A[i][k]), None)
            if swap is None:
                return 0
            A[k], A[swap] = A[swap], A[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                A[i][j] = (A[i][j] * A[k][k] - A[i][k] * A[k][j]) // prev
        prev = A[k][k]
    return sign * A[n - 1][n - 1]


@dataclass(frozen=True)
class GroupPoint:
    matrix: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(int(x) for x in row) for row in self.matrix)
        object.__setattr__(self, "matrix", rows)
        n = len(rows)
        if n < 2 or any(len(r) != n for r in rows):
            raise ValueError("a group point needs a square matrix of size >= 2")
        flat = [x for r in rows for x in r]
        g = 0
        for x in flat:
            g = gcd(g, x)
        if g != 1:
            raise ValueError("matrix is not primitive; use GroupPoint.from_matrix")
        if next(x for x in flat if x) < 0:
            raise ValueError("first nonzero entry must be positive; use GroupPoint.from_matrix")
        if self.det == 0:
            raise SingularMatrixError("matrix is singular")

    @classmethod
    def from_matrix(cls, M: Sequence[Sequence]) -> "GroupPoint":
        """Canonical representative of the class of a nonsingular rational matrix."""
        rows = [[Fraction(x) for x in row] for row in M]
        den = 1
        for x in (x for r in rows for x in r):
            den = den * x.denominator // gcd(den, x.denominator)
        ints = [[int(x * den) for x in r] for r in rows]
        g = 0
        for x in (x for r in ints for x in r):
            g = gcd(g, x)
        if g == 0:
            raise SingularMatrixError("zero matrix")
        first = next(x for r in ints for x in r if x)
        s = g if first > 0 else -g
        return cls(tuple(tuple(x // s for x in r) for r in ints))

    @property
    def n(self) -> int:
        return len(self.matrix)

    @property
    def det(self) -> int:
        return int_det(self.matrix)

    def __str__(self) -> str:
        return ";".join(",".join(map(str, r)) for r in self.matrix)


def parse_matrix(text: str) -> GroupPoint:
    """Parse row-major text such as ``"2,1;0,2"``."""
    try:
        rows = [[int(x) for x in re.split(r"[,\s]+", r.strip()) if x] for r in text.split(";")]
    except ValueError:
        raise ValueError(f"cannot parse matrix {text!r}") from None
    return GroupPoint.from_matrix(rows)


def _vp(x: int, p: int) -> int:
    k = 0
    while x % p == 0:
        x //= p
        k += 1
    return k


def smith_exponents(M: Sequence[Sequence[int]], p: int) -> tuple[int, ...]:
    """p-adic valuations of the Smith form of M, in nondecreasing order.

    Elimination runs over Z/p^N with N = v_p(det M) + 1, where every element
    of valuation zero is invertible; no exponent can reach N.
    """
    if not isprime(p):
        raise ValueError(f"{p} is not a prime")
    d = int_det(M)
    if d == 0:
        raise SingularMatrixError("matrix is singular")
    N = _vp(abs(d), p) + 1
    mod = p**N
    A = [[int(x) % mod for x in row] for row in M]
    n = len(A)
    out = []
    for t in range(n):
        best = None
        for i in range(t, n):
            for j in range(t, n):
                if A[i][j]:
                    v = _vp(A[i][j], p)
                    if best is None or v < best[0]:
                        best = (v, i, j)
        if best is None:
            raise AssertionError("lost rank during p-adic elimination")
        v, i, j = best
        A[t], A[i] = A[i], A[t]
        for row in A:
            row[t], row[j] = row[j], row[t]
        unit = A[t][t] // p**v
        inv = pow(unit, -1, mod)
        for i in range(t + 1, n):
            if A[i][t]:
                q = (A[i][t] // p**v) * inv % mod
                A[i] = [(x - q * y) % mod for x, y in zip(A[i], A[t])]
        for j in range(t + 1, n):
            if A[t][j]:
                q = (A[t][j] // p**v) * inv % mod
                for row in A:
                    row[j] = (row[j] - q * row[t]) % mod
        out.append(v)
    return tuple(sorted(out))


@dataclass(frozen=True)
class LocalCartanData:
    place: Place
    a: tuple

    @property
    def is_archimedean(self) -> bool:
        return self.place == INF


def singular_values(M: Sequence[Sequence[int]], dps: int = ARCH_DPS) -> list:
    """Singular values of a real square matrix, largest first, as mpf."""
    with mpmath.workdps(dps):
        A = mpmath.matrix([[mpmath.mpf(x) for x in row] for row in M])
        G = A.T * A
        try:
            ev = mpmath.eigsy(G, eigvals_only=True)
        except Exception as exc:  # mpmath raises plain RuntimeError/ZeroDivisionError
            raise HeightComputationError(f"eigenvalue iteration failed: {exc}") from exc
        vals = sorted((ev[i] for i in range(len(M))), reverse=True)
        if vals[-1] <= 0:
            raise HeightComputationError("nonpositive eigenvalue for a nonsingular matrix")
        return [mpmath.sqrt(v) for v in vals]


def local_cartan(point: GroupPoint, place: Place) -> LocalCartanData:
    if place == INF:
        with mpmath.workdps(ARCH_DPS):
            s = singular_values(point.matrix)
            a = tuple(mpmath.log(s[i] / s[i + 1]) for i in range(point.n - 1))
        return LocalCartanData(INF, a)
    e = smith_exponents(point.matrix, int(place))
    return LocalCartanData(int(place), tuple(e[i + 1] - e[i] for i in range(point.n - 1)))


def _exponent(d: LocalCartanData, lam: PicClass):
    if len(d.a) != len(lam):
        raise ValueError(f"Cartan vector has length {len(d.a)}, class has {len(lam)}")
    if d.is_archimedean:
        with mpmath.workdps(ARCH_DPS):
            return mpmath.fsum(mpmath.mpf(c.numerator) / c.denominator * x for c, x in zip(lam.coeffs, d.a))
    return sum((c * x for c, x in zip(lam.coeffs, d.a)), Fraction(0))


def _prime_power(p: int, e: Fraction):
    if e.denominator == 1:
        return Fraction(p) ** int(e)
    with mpmath.workdps(ARCH_DPS):
        return mpmath.power(p, mpmath.mpf(e.numerator) / e.denominator)


def local_height(d: LocalCartanData, lam: PicClass):
    """p^<lambda,a> at a prime (exact when the exponent is integral), exp(<lambda,a>) at inf."""
    e = _exponent(d, lam)
    if d.is_archimedean:
        with mpmath.workdps(ARCH_DPS):
            return mpmath.exp(e)
    return _prime_power(d.place, e)


@dataclass(frozen=True)
class HeightValue:
    finite_exponents: tuple[tuple[int, Fraction], ...]
    arch_part: mpmath.mpf

    @property
    def finite_part(self):
        """Exact rational when every exponent is integral, else an mpf."""
        out = Fraction(1)
        for p, e in self.finite_exponents:
            out = out * _prime_power(p, e)
        return out

    @property
    def log_finite(self):
        with mpmath.workdps(ARCH_DPS):
            return mpmath.fsum(mpmath.mpf(e.numerator) / e.denominator * mpmath.log(p)
                               for p, e in self.finite_exponents)

    @property
    def total(self):
        with mpmath.workdps(ARCH_DPS):
            f = self.finite_part
            if isinstance(f, Fraction):
                f = mpmath.mpf(f.numerator) / f.denominator
            return f * self.arch_part


def det_primes(point: GroupPoint) -> list[int]:
    return sorted(factorint(abs(point.det)))


def global_height(point: GroupPoint, lam: PicClass) -> HeightValue:
    """Product of the local heights; only primes dividing det contribute."""
    if len(lam) != point.n - 1:
        raise ValueError(f"class has {len(lam)} coefficients, PGL_{point.n} needs {point.n - 1}")
    exps = []
    for p in det_primes(point):
        e = _exponent(local_cartan(point, p), lam)
        if e:
            exps.append((p, e))
    arch = local_height(local_cartan(point, INF), lam)
    return HeightValue(tuple(exps), arch)


def delta_indicator(point: GroupPoint, D: DivisorChoice, S: PlaceSet) -> int:
    """1 when the Cartan coordinates along D vanish at every prime outside S."""
    if not D.in_d:
        return 1
    for p in det_primes(point):
        if p in S.finite_primes:
            continue
        a = local_cartan(point, p).a
        if any(a[i] for i in D.in_d):
            return 0
    return 1
