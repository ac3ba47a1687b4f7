"""Root systems of split adjoint groups.

Roots live in the usual ambient lattices (doubled where the textbook
coordinates use half-integers, e.g. F4 and E6-E8) and are converted to
simple-root coordinates by an exact rational solve.  Nothing here is
tabulated except the simple roots themselves.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

FAMILIES = ("A", "B", "C", "D", "E", "F", "G")

# dim G for each family as a function of the rank
_DIMENSION = {
    "A": lambda r: r * (r + 2),
    "B": lambda r: r * (2 * r + 1),
    "C": lambda r: r * (2 * r + 1),
    "D": lambda r: r * (2 * r - 1),
    "G": lambda r: 14,
    "F": lambda r: 52,
    "E": lambda r: {6: 78, 7: 133, 8: 248}[r],
}

_MIN_RANK = {"A": 1, "B": 2, "C": 2, "D": 3}
_FIXED_RANKS = {"G": (2,), "F": (4,), "E": (6, 7, 8)}


class CartanTypeError(ValueError):
    """Raised for an unknown family or a family/rank mismatch."""


@dataclass(frozen=True)
class CartanType:
    family: str
    rank: int

    def __post_init__(self):
        fam = self.family.upper()
        object.__setattr__(self, "family", fam)
        if fam not in FAMILIES:
            raise CartanTypeError(f"unknown Cartan family {self.family!r}")
        if not isinstance(self.rank, int) or self.rank < 1:
            raise CartanTypeError(f"rank must be a positive integer, got {self.rank!r}")
        if fam in _FIXED_RANKS and self.rank not in _FIXED_RANKS[fam]:
            allowed = ", ".join(f"{fam}{r}" for r in _FIXED_RANKS[fam])
            raise CartanTypeError(f"{fam}{self.rank} is not a Cartan type (allowed: {allowed})")
        if fam in _MIN_RANK and self.rank < _MIN_RANK[fam]:
            raise CartanTypeError(
                f"{fam}{self.rank} is not a simple type; {fam} needs rank >= {_MIN_RANK[fam]}"
            )

    @classmethod
    def parse(cls, text: str) -> "CartanType":
        """Parse strings such as ``"A2"``, ``"g2"`` or ``"E8"``."""
        m = re.fullmatch(r"\s*([A-Ga-g])\s*(\d+)\s*", text)
        if m is None:
            raise CartanTypeError(f"cannot parse Cartan type from {text!r}")
        return cls(m.group(1), int(m.group(2)))

    @property
    def dimension(self) -> int:
        """Dimension of the corresponding simple group."""
        return _DIMENSION[self.family](self.rank)

    def __str__(self) -> str:
        return f"{self.family}{self.rank}"


def _unit(n: int, i: int, scale: int = 1) -> list[int]:
    v = [0] * n
    v[i] = scale
    return v


def _e8_simple_roots() -> list[list[int]]:
    # Bourbaki numbering, coordinates doubled
    roots = [[1, -1, -1, -1, -1, -1, -1, 1], [2, 2, 0, 0, 0, 0, 0, 0]]
    for i in range(6):
        v = [0] * 8
        v[i], v[i + 1] = -2, 2
        roots.append(v)
    return roots


def _ambient_simple_roots(ct: CartanType) -> list[list[int]]:
    r, fam = ct.rank, ct.family
    if fam == "A":
        out = []
        for i in range(r):
            v = [0] * (r + 1)
            v[i], v[i + 1] = 1, -1
            out.append(v)
        return out
    if fam in "BCD":
        out = []
        for i in range(r - 1):
            v = [0] * r
            v[i], v[i + 1] = 1, -1
            out.append(v)
        if fam == "B":
            out.append(_unit(r, r - 1))
        elif fam == "C":
            out.append(_unit(r, r - 1, 2))
        else:
            v = [0] * r
            v[r - 2], v[r - 1] = 1, 1
            out.append(v)
        return out
    if fam == "G":
        return [[1, -1, 0], [-2, 1, 1]]
    if fam == "F":
        return [[0, 2, -2, 0], [0, 0, 2, -2], [0, 0, 0, 2], [1, -1, -1, -1]]
    return _e8_simple_roots()[:r]


def _dot(u: Sequence[int], v: Sequence[int]) -> int:
    return sum(a * b for a, b in zip(u, v))


def _solve(matrix: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction]:
    """Exact Gauss-Jordan solve of a nonsingular square system."""
    n = len(matrix)
    aug = [list(map(Fraction, row)) + [Fraction(b)] for row, b in zip(matrix, rhs)]
    for col in range(n):
        piv = next(i for i in range(col, n) if aug[i][col] != 0)
        aug[col], aug[piv] = aug[piv], aug[col]
        pv = aug[col][col]
        aug[col] = [x / pv for x in aug[col]]
        for i in range(n):
            if i != col and aug[i][col] != 0:
                f = aug[i][col]
                aug[i] = [x - f * y for x, y in zip(aug[i], aug[col])]
    return [aug[i][n] for i in range(n)]


def _positive_roots(simple: list[list[int]]) -> list[tuple[int, ...]]:
    """Orbit of the simple roots under the simple reflections, positive half."""
    norms = [_dot(a, a) for a in simple]
    seen = {tuple(a) for a in simple}
    frontier = list(seen)
    while frontier:
        nxt = []
        for v in frontier:
            for a, na in zip(simple, norms):
                c = 2 * _dot(v, a)
                if c % na:
                    raise AssertionError("non-crystallographic pairing")
                w = tuple(x - (c // na) * y for x, y in zip(v, a))
                if w not in seen:
                    seen.add(w)
                    nxt.append(w)
        frontier = nxt
    return list(seen)


@dataclass(frozen=True)
class RootDatum:
    """Combinatorial data of a split adjoint group of a given Cartan type.

    ``positive_roots_simple`` holds each positive root in simple-root
    coordinates; ``kappa[i]`` is the coefficient of the i-th simple root in
    the sum of all positive roots.
    """

    cartan_type: CartanType
    simple_roots: tuple[tuple[int, ...], ...]
    positive_roots: tuple[tuple[int, ...], ...]
    positive_roots_simple: tuple[tuple[int, ...], ...]
    cartan_matrix: tuple[tuple[int, ...], ...]
    kappa: tuple[int, ...]
    fundamental_coweights: tuple[tuple[Fraction, ...], ...] = field(repr=False)

    @property
    def rank(self) -> int:
        return self.cartan_type.rank

    @property
    def two_rho(self) -> tuple[int, ...]:
        """Sum of the positive roots in ambient coordinates."""
        return tuple(sum(c) for c in zip(*self.positive_roots))


def build_root_datum(cartan_type: CartanType | str) -> RootDatum:
    ct = CartanType.parse(cartan_type) if isinstance(cartan_type, str) else cartan_type
    simple = _ambient_simple_roots(ct)
    r = len(simple)
    gram = [[Fraction(_dot(a, b)) for b in simple] for a in simple]
    cartan = tuple(
        tuple(2 * _dot(simple[i], simple[j]) // _dot(simple[j], simple[j]) for j in range(r))
        for i in range(r)
    )

    pos_ambient, pos_simple = [], []
    for root in _positive_roots(simple):
        coeffs = _solve(gram, [Fraction(_dot(a, root)) for a in simple])
        if any(c.denominator != 1 for c in coeffs):
            raise AssertionError(f"root {root} is not an integral combination of simple roots")
        ints = tuple(int(c) for c in coeffs)
        if all(c >= 0 for c in ints):
            pos_ambient.append(tuple(root))
            pos_simple.append(ints)
    order = sorted(range(len(pos_simple)), key=lambda k: (sum(pos_simple[k]), pos_simple[k]))
    pos_ambient = [pos_ambient[k] for k in order]
    pos_simple = [pos_simple[k] for k in order]

    kappa = tuple(sum(col) for col in zip(*pos_simple))

    # dual basis: <alpha_i, w_j> = delta_ij, w_j expanded in the simple roots
    coweights = []
    for j in range(r):
        c = _solve(gram, [Fraction(int(i == j)) for i in range(r)])
        coweights.append(
            tuple(sum((c[k] * simple[k][x] for k in range(r)), Fraction(0)) for x in range(len(simple[0])))
        )

    return RootDatum(
        cartan_type=ct,
        simple_roots=tuple(tuple(a) for a in simple),
        positive_roots=tuple(pos_ambient),
        positive_roots_simple=tuple(pos_simple),
        cartan_matrix=cartan,
        kappa=kappa,
        fundamental_coweights=tuple(coweights),
    )


def pairing(coeffs: Sequence, a: Sequence) -> Fraction:
    """Exact value of sum_i coeffs[i] * a[i]."""
    if len(coeffs) != len(a):
        raise ValueError(f"length mismatch: {len(coeffs)} != {len(a)}")
    return sum((Fraction(x) * Fraction(y) for x, y in zip(coeffs, a)), Fraction(0))
