"""Independent reference computations used by the tests."""

from fractions import Fraction
from itertools import product
from math import gcd


def textbook_cartan(family, r):
    """Cartan matrices A[i][j] = <alpha_i, alpha_j^vee> typed in by hand."""
    A = [[0] * r for _ in range(r)]
    for i in range(r):
        A[i][i] = 2
    if family in "ABCD":
        for i in range(r - 1):
            A[i][i + 1] = A[i + 1][i] = -1
        if family == "B":
            A[r - 2][r - 1] = -2   # <a_{r-1}, a_r^vee> with a_r short
        elif family == "C":
            A[r - 1][r - 2] = -2
        elif family == "D":
            A[r - 2][r - 1] = A[r - 1][r - 2] = 0
            A[r - 3][r - 1] = A[r - 1][r - 3] = -1
        return A
    if family == "G":
        return [[2, -1], [-3, 2]]
    if family == "F":
        return [[2, -1, 0, 0], [-1, 2, -2, 0], [0, -1, 2, -1], [0, 0, -1, 2]]
    if family == "E":
        edges = [(0, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7), (1, 3)]
        for i, j in edges:
            if i < r and j < r:
                A[i][j] = A[j][i] = -1
        return A
    raise ValueError(family)


def positive_roots_from_strings(A):
    """Positive roots in simple-root coordinates via root strings."""
    r = len(A)
    simple = [tuple(int(i == j) for j in range(r)) for i in range(r)]
    roots = set(simple)
    layer = list(simple)
    while layer:
        nxt = []
        for beta in layer:
            for i in range(r):
                p = 0
                while True:
                    cand = tuple(b - (p + 1) * (k == i) for k, b in enumerate(beta))
                    if cand in roots:
                        p += 1
                    else:
                        break
                pairing = sum(beta[j] * A[j][i] for j in range(r))
                if p - pairing > 0:
                    up = tuple(b + (k == i) for k, b in enumerate(beta))
                    if up not in roots:
                        roots.add(up)
                        nxt.append(up)
        layer = nxt
    return roots


def kappa_oracle(family, r):
    roots = positive_roots_from_strings(textbook_cartan(family, r))
    return tuple(sum(col) for col in zip(*roots)), len(roots)


def snf_diagonal(M):
    """Smith normal form diagonal by elementary row/column operations over Z."""
    A = [list(row) for row in M]
    n = len(A)
    diag = []
    for t in range(n):
        while True:
            entries = [(abs(A[i][j]), i, j) for i in range(t, n) for j in range(t, n) if A[i][j]]
            if not entries:
                diag.append(0)
                break
            _, i, j = min(entries)
            A[t], A[i] = A[i], A[t]
            for row in A:
                row[t], row[j] = row[j], row[t]
            piv = A[t][t]
            done = True
            for i in range(t + 1, n):
                q = A[i][t] // piv
                A[i] = [x - q * y for x, y in zip(A[i], A[t])]
                if A[i][t]:
                    done = False
            for j in range(t + 1, n):
                q = A[t][j] // piv
                for row in A:
                    row[j] -= q * row[t]
                if A[t][j]:
                    done = False
            if not done:
                continue
            bad = [(i, j) for i in range(t + 1, n) for j in range(t + 1, n) if A[i][j] % piv]
            if bad:
                i, _ = bad[0]
                A[t] = [x + y for x, y in zip(A[t], A[i])]
                continue
            diag.append(abs(piv))
            break
    return diag


def vp(x, p):
    x = abs(x)
    k = 0
    while x % p == 0:
        x //= p
        k += 1
    return k


def det(M):
    n = len(M)
    if n == 1:
        return M[0][0]
    return sum((-1) ** j * M[0][j] * det([row[:j] + row[j + 1:] for row in M[1:]]) for j in range(n))


def brute_force_points(n, bound):
    """Nested-loop list of canonical primitive nonsingular matrices in the box."""
    out = []
    for entries in product(range(-bound, bound + 1), repeat=n * n):
        first = next((x for x in entries if x), 0)
        if first <= 0:
            continue
        g = 0
        for x in entries:
            g = gcd(g, x)
        if g != 1:
            continue
        M = [list(entries[i * n:(i + 1) * n]) for i in range(n)]
        if det(M) == 0:
            continue
        out.append(tuple(entries))
    return out


def hnf_cotype_count(n, p, e):
    """Count upper-triangular Hermite forms of det p^sum(e) whose SNF is diag(p^e)."""
    target = sorted(e)
    total = sum(target)
    count = 0

    def comps(k, parts):
        if parts == 1:
            yield (k,)
            return
        for i in range(k + 1):
            for rest in comps(k - i, parts - 1):
                yield (i,) + rest

    for c in comps(total, n):
        slots = [(i, j) for j in range(n) for i in range(j)]
        ranges = [range(p ** c[j]) for (i, j) in slots]
        for vals in product(*ranges):
            H = [[0] * n for _ in range(n)]
            for k in range(n):
                H[k][k] = p ** c[k]
            for (i, j), v in zip(slots, vals):
                H[i][j] = v
            d = snf_diagonal(H)
            if sorted(vp(x, p) for x in d) == target:
                count += 1
    return count
