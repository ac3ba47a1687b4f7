"""Picard-lattice bookkeeping on the wonderful compactification.

Classes are written in the basis of boundary divisors, one coordinate per
simple root.  Indices are 0-based internally; the text parsers accept the
1-based Bourbaki labels used on the command line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from wondercount.root_data import RootDatum


@dataclass(frozen=True)
class PicClass:
    coeffs: tuple[Fraction, ...]

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(Fraction(c) for c in self.coeffs))

    def __len__(self) -> int:
        return len(self.coeffs)

    @property
    def is_big(self) -> bool:
        return all(c > 0 for c in self.coeffs)

    def scaled(self, t) -> "PicClass":
        return PicClass(tuple(Fraction(t) * c for c in self.coeffs))

    def __str__(self) -> str:
        return ",".join(str(c) for c in self.coeffs)


@dataclass(frozen=True)
class DivisorChoice:
    """The set of simple-root indices whose boundary divisors make up D."""

    in_d: frozenset[int] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "in_d", frozenset(int(i) for i in self.in_d))
        if any(i < 0 for i in self.in_d):
            raise ValueError("divisor indices must be non-negative")

    @classmethod
    def full(cls, rank: int) -> "DivisorChoice":
        return cls(frozenset(range(rank)))

    def check_rank(self, rank: int) -> None:
        bad = sorted(i for i in self.in_d if i >= rank)
        if bad:
            raise ValueError(f"divisor indices {[i + 1 for i in bad]} exceed rank {rank}")

    def __contains__(self, i: int) -> bool:
        return i in self.in_d

    def __str__(self) -> str:
        if not self.in_d:
            return "none"
        return ",".join(str(i + 1) for i in sorted(self.in_d))


@dataclass(frozen=True)
class PlaceSet:
    """A finite set of places of Q; the real place is always included."""

    finite_primes: frozenset[int] = frozenset()

    def __post_init__(self):
        primes = frozenset(int(p) for p in self.finite_primes)
        for p in primes:
            if p < 2 or any(p % q == 0 for q in range(2, math.isqrt(p) + 1)):
                raise ValueError(f"{p} is not a prime")
        object.__setattr__(self, "finite_primes", primes)

    contains_infinity = True

    @property
    def size(self) -> int:
        return 1 + len(self.finite_primes)

    def __contains__(self, p) -> bool:
        return p == "inf" or p in self.finite_primes

    def with_prime(self, p: int) -> "PlaceSet":
        return PlaceSet(self.finite_primes | {p})

    def __str__(self) -> str:
        return ",".join(["inf"] + [str(p) for p in sorted(self.finite_primes)])


@dataclass(frozen=True)
class AsymptoticInvariants:
    a: Fraction
    A_lambda: frozenset[int]
    r_lambda: int
    d_lambda: int
    b: int


def anticanonical(rd: RootDatum) -> PicClass:
    return PicClass(tuple(k + 1 for k in rd.kappa))


def log_anticanonical(rd: RootDatum, D: DivisorChoice) -> PicClass:
    D.check_rank(rd.rank)
    return PicClass(tuple(k if i in D else k + 1 for i, k in enumerate(rd.kappa)))


def pole_ratios(rd: RootDatum, lam: PicClass, D: DivisorChoice) -> tuple[Fraction, ...]:
    """kappa/lambda on D and (kappa+1)/lambda off D, per simple root."""
    return tuple(
        Fraction(k + (0 if i in D else 1)) / lam.coeffs[i] for i, k in enumerate(rd.kappa)
    )


def invariants(rd: RootDatum, lam: PicClass, D: DivisorChoice, S: PlaceSet) -> AsymptoticInvariants:
    """Growth exponent a(lambda), the argmax set and the log-power b(lambda)."""
    if len(lam) != rd.rank:
        raise ValueError(f"class has {len(lam)} coefficients, rank is {rd.rank}")
    D.check_rank(rd.rank)
    if not lam.is_big:
        raise ValueError(f"class ({lam}) is not big: every coefficient must be positive")
    ratios = pole_ratios(rd, lam, D)
    a = max(ratios)
    A = frozenset(i for i, q in enumerate(ratios) if q == a)
    r = len(A)
    d = len(A & D.in_d)
    return AsymptoticInvariants(a=a, A_lambda=A, r_lambda=r, d_lambda=d, b=r - d + S.size * d)


class UnsupportedFieldError(ValueError):
    pass


def character_group_order(base_field: str, D: DivisorChoice, lam: PicClass, S: PlaceSet) -> int:
    """Order of the group of automorphic characters feeding the leading pole.

    Only Q is supported; its class number is one, so every unramified
    character of a split group is trivial and the group has one element.
    """
    if str(base_field).strip().upper() not in ("Q", "QQ", "RATIONALS"):
        raise UnsupportedFieldError(
            f"unsupported base field {base_field!r}: only Q (class number one) is implemented"
        )
    return 1


def parse_divisor(text: str, rank: int) -> DivisorChoice:
    """Parse ``"1,3"``, ``"all"`` or ``"none"`` (1-based indices)."""
    t = text.strip().lower()
    if t in ("none", ""):
        return DivisorChoice()
    if t in ("all", "full"):
        return DivisorChoice.full(rank)
    try:
        idx = [int(x) - 1 for x in t.split(",")]
    except ValueError:
        raise ValueError(f"cannot parse divisor {text!r}") from None
    if any(i < 0 or i >= rank for i in idx):
        raise ValueError(f"divisor indices in {text!r} must lie in 1..{rank}")
    return DivisorChoice(frozenset(idx))


def parse_lambda(text: str, rd: RootDatum, D: DivisorChoice) -> PicClass:
    """Parse comma-separated rationals or ``anticanonical``/``log-anticanonical``."""
    t = text.strip().lower()
    if t == "anticanonical":
        return anticanonical(rd)
    if t in ("log-anticanonical", "log_anticanonical"):
        return log_anticanonical(rd, D)
    try:
        coeffs = tuple(Fraction(x.strip()) for x in t.split(","))
    except ValueError:
        raise ValueError(f"cannot parse class {text!r}") from None
    if len(coeffs) != rd.rank:
        raise ValueError(f"class {text!r} has {len(coeffs)} coefficients, rank is {rd.rank}")
    return PicClass(coeffs)


def parse_places(text: str | Iterable) -> PlaceSet:
    """Parse ``"inf,2,3"``; the real place is implied if omitted."""
    items = text.split(",") if isinstance(text, str) else list(text)
    primes = set()
    for it in items:
        s = str(it).strip().lower()
        if s in ("inf", "infinity", "oo", ""):
            continue
        try:
            primes.add(int(s))
        except ValueError:
            raise ValueError(f"cannot parse place {it!r}") from None
    return PlaceSet(frozenset(primes))
