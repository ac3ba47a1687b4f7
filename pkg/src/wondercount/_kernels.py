"""Compiled inner loops for counting PGL_2 and PGL_3 points.

Each kernel walks the canonical first rows it is handed, fills in the
remaining rows inside the entry box, and histograms log-heights against the
grid.  Elementary divisors come from gcds of minors (exact integers); the
singular values come from the integer characteristic polynomial of M^T M.
Points whose log-height lies within FLAG_BAND of a grid value are not
counted here but written to a buffer for high-precision resolution.

Pruning (when enabled) only skips matrices for which a proven lower bound
on the height exceeds the largest grid value:
  * every row and column norm is at most sigma_1 <= sigma1_max;
  * for n = 3 and any two rows r_i, r_j,
        max(|r_i|, |r_j|) * |r_i x r_j| / gcd(r_i x r_j)  <=  T,
    where T = B_max^(1/min lambda).
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

FLAG_BAND = 1e-6


@njit(cache=True)
def _gcd(a, b):
    a = abs(a)
    b = abs(b)
    while b:
        a, b = b, a % b
    return a


@njit(cache=True)
def _isqrt_floor(x):
    if x < 0:
        return -1
    r = int(math.sqrt(x))
    while r * r > x:
        r -= 1
    while (r + 1) * (r + 1) <= x:
        r += 1
    return r


@njit(cache=True)
def _is_s_unit(q, primes):
    for k in range(primes.shape[0]):
        p = primes[k]
        if p == 0:
            break
        while q % p == 0:
            q //= p
    return q == 1


@njit(cache=True)
def _locate(logh, log_grid):
    """Index of the first grid value >= logh, and whether logh is within the band."""
    lo = 0
    hi = log_grid.shape[0]
    while lo < hi:
        mid = (lo + hi) // 2
        if log_grid[mid] < logh:
            lo = mid + 1
        else:
            hi = mid
    near = False
    if lo < log_grid.shape[0] and abs(log_grid[lo] - logh) <= FLAG_BAND:
        near = True
    if lo > 0 and abs(log_grid[lo - 1] - logh) <= FLAG_BAND:
        near = True
    return lo, near


@njit(cache=True)
def _largest_root(e1, e2, e3):
    """Largest root of x^3 - e1 x^2 + e2 x - e3 with three real nonnegative roots."""
    s = e1 / 3.0
    p = e2 - e1 * s
    q = -2.0 * s * s * s + s * e2 - e3
    if p >= -1e-300 or -p <= 1e-15 * e1 * e1:
        x = s
    else:
        r = math.sqrt(-p / 3.0)
        c = (3.0 * q / (2.0 * p)) * math.sqrt(-3.0 / p)
        if c > 1.0:
            c = 1.0
        elif c < -1.0:
            c = -1.0
        x = s + 2.0 * r * math.cos(math.acos(c) / 3.0)
    for _ in range(3):
        f = ((x - e1) * x + e2) * x - e3
        fp = (3.0 * x - 2.0 * e1) * x + e2
        if fp <= 0.0:
            break
        step = f / fp
        x -= step
        if abs(step) <= 1e-17 * x:
            break
    return x


@njit(cache=True)
def _log_height3(frob, minors, adet, g2, quo2, l1, l2):
    """log H for PGL_3 from |M|_F^2, the sum of squared 2x2 minors and |det|.

    M^T M has eigenvalues with elementary symmetric functions (frob, minors,
    det^2); its adjugate has (minors, frob det^2, det^4).  Both largest roots
    are well conditioned, which pins down all three singular values.
    """
    F = float(frob)
    e2 = float(minors)
    d2 = float(adet) * float(adet)
    lam1 = _largest_root(F, e2, d2)
    mu1 = _largest_root(e2, F * d2, d2 * d2)
    ls1 = math.log(lam1)
    ls2 = math.log(mu1) - ls1
    ls3 = math.log(d2) - math.log(mu1)
    return (l1 * (math.log(float(g2)) + 0.5 * (ls1 - ls2))
            + l2 * (math.log(float(quo2)) + 0.5 * (ls2 - ls3)))


@njit(cache=True)
def pgl3_log_height(M, l1, l2):
    """Kernel log-height of a single nonsingular primitive 3x3 matrix."""
    r = M
    c = np.empty(9, dtype=np.int64)
    k = 0
    for i in range(3):
        for j in range(i + 1, 3):
            c[k] = r[i, 1] * r[j, 2] - r[i, 2] * r[j, 1]
            c[k + 1] = r[i, 2] * r[j, 0] - r[i, 0] * r[j, 2]
            c[k + 2] = r[i, 0] * r[j, 1] - r[i, 1] * r[j, 0]
            k += 3
    g2 = 0
    minors = 0
    frob = 0
    for k in range(9):
        g2 = _gcd(g2, c[k])
        minors += c[k] * c[k]
    for i in range(3):
        for j in range(3):
            frob += r[i, j] * r[i, j]
    det = r[2, 0] * c[0] + r[2, 1] * c[1] + r[2, 2] * c[2]
    adet = abs(det)
    return _log_height3(frob, minors, adet, g2, adet // (g2 * g2), l1, l2)


@njit(cache=True)
def count_pgl2(first_rows, bound, sigma1_sq_max, prune, lam0, log_grid, dmask, sprimes,
               flag_buf):
    ncfg = dmask.shape[0]
    ngrid = log_grid.shape[0]
    hist = np.zeros((ncfg, ngrid), dtype=np.int64)
    nflag = 0
    visited = 0
    top = log_grid[ngrid - 1]
    for k in range(first_rows.shape[0]):
        a = first_rows[k, 0]
        b = first_rows[k, 1]
        g1 = _gcd(a, b)
        cmax = bound
        if prune:
            cmax = min(bound, _isqrt_floor(int(sigma1_sq_max - a * a)))
        for c in range(-cmax, cmax + 1):
            dmax = bound
            if prune:
                lim = sigma1_sq_max - max(c * c, b * b)
                dmax = min(bound, _isqrt_floor(int(lim)))
            for d in range(-dmax, dmax + 1):
                visited += 1
                det = a * d - b * c
                if det == 0:
                    continue
                if _gcd(g1, _gcd(c, d)) != 1:
                    continue
                F = a * a + b * b + c * c + d * d
                disc = F * F - 4 * det * det
                s1sq = 0.5 * (F + math.sqrt(float(disc)))
                logh = lam0 * math.log(s1sq)
                if logh > top + FLAG_BAND:
                    continue
                j, near = _locate(logh, log_grid)
                if near:
                    if nflag < flag_buf.shape[0]:
                        flag_buf[nflag, 0] = a
                        flag_buf[nflag, 1] = b
                        flag_buf[nflag, 2] = c
                        flag_buf[nflag, 3] = d
                    nflag += 1
                    continue
                q = abs(det)
                for t in range(ncfg):
                    if dmask[t, 0] and not _is_s_unit(q, sprimes[t]):
                        continue
                    hist[t, j] += 1
    return hist, nflag, visited


@njit(cache=True)
def count_pgl3(first_rows, bound, sigma1_sq_max, t_sq_max, prune, lam, log_grid, dmask,
               sprimes, flag_buf):
    ncfg = dmask.shape[0]
    ngrid = log_grid.shape[0]
    hist = np.zeros((ncfg, ngrid), dtype=np.int64)
    nflag = 0
    visited = 0
    top = log_grid[ngrid - 1]
    l1 = lam[0]
    l2 = lam[1]
    for k in range(first_rows.shape[0]):
        a1 = first_rows[k, 0]
        a2 = first_rows[k, 1]
        a3 = first_rows[k, 2]
        n1 = a1 * a1 + a2 * a2 + a3 * a3
        g1 = _gcd(_gcd(a1, a2), a3)
        xm = bound
        ym = bound
        zm = bound
        if prune:
            xm = min(bound, _isqrt_floor(int(sigma1_sq_max - a1 * a1)))
            ym = min(bound, _isqrt_floor(int(sigma1_sq_max - a2 * a2)))
            zm = min(bound, _isqrt_floor(int(sigma1_sq_max - a3 * a3)))
        for x in range(-xm, xm + 1):
            for y in range(-ym, ym + 1):
                for z in range(-zm, zm + 1):
                    n2 = x * x + y * y + z * z
                    if prune and n2 > sigma1_sq_max:
                        continue
                    c1 = a2 * z - a3 * y
                    c2 = a3 * x - a1 * z
                    c3 = a1 * y - a2 * x
                    m12 = c1 * c1 + c2 * c2 + c3 * c3
                    if m12 == 0:
                        continue
                    g12 = _gcd(_gcd(c1, c2), c3)
                    if prune and max(n1, n2) * m12 > t_sq_max * g12 * g12:
                        continue
                    gr = _gcd(g1, _gcd(_gcd(x, y), z))
                    um = bound
                    vm = bound
                    wm = bound
                    if prune:
                        um = min(bound, _isqrt_floor(int(sigma1_sq_max - a1 * a1 - x * x)))
                        vm = min(bound, _isqrt_floor(int(sigma1_sq_max - a2 * a2 - y * y)))
                        wm = min(bound, _isqrt_floor(int(sigma1_sq_max - a3 * a3 - z * z)))
                    for u in range(-um, um + 1):
                        for v in range(-vm, vm + 1):
                            for w in range(-wm, wm + 1):
                                visited += 1
                                det = u * c1 + v * c2 + w * c3
                                if det == 0:
                                    continue
                                n3 = u * u + v * v + w * w
                                if prune and n3 > sigma1_sq_max:
                                    continue
                                if _gcd(gr, _gcd(_gcd(u, v), w)) != 1:
                                    continue
                                p1 = a2 * w - a3 * v
                                p2 = a3 * u - a1 * w
                                p3 = a1 * v - a2 * u
                                m13 = p1 * p1 + p2 * p2 + p3 * p3
                                q1 = y * w - z * v
                                q2 = z * u - x * w
                                q3 = x * v - y * u
                                m23 = q1 * q1 + q2 * q2 + q3 * q3
                                g13 = -1
                                g23 = -1
                                if prune:
                                    if max(n1, n3) * m13 > t_sq_max:
                                        g13 = _gcd(_gcd(p1, p2), p3)
                                        if max(n1, n3) * m13 > t_sq_max * g13 * g13:
                                            continue
                                    if max(n2, n3) * m23 > t_sq_max:
                                        g23 = _gcd(_gcd(q1, q2), q3)
                                        if max(n2, n3) * m23 > t_sq_max * g23 * g23:
                                            continue
                                if g13 < 0:
                                    g13 = _gcd(_gcd(p1, p2), p3)
                                if g23 < 0:
                                    g23 = _gcd(_gcd(q1, q2), q3)
                                g2 = _gcd(_gcd(g12, g13), g23)
                                adet = abs(det)
                                # elementary divisors 1 | g2 | adet/g2
                                quo2 = adet // (g2 * g2)
                                logh = _log_height3(n1 + n2 + n3, m12 + m13 + m23, adet,
                                                    g2, quo2, l1, l2)
                                if logh > top + FLAG_BAND:
                                    continue
                                j, near = _locate(logh, log_grid)
                                if near:
                                    if nflag < flag_buf.shape[0]:
                                        flag_buf[nflag, 0] = a1
                                        flag_buf[nflag, 1] = a2
                                        flag_buf[nflag, 2] = a3
                                        flag_buf[nflag, 3] = x
                                        flag_buf[nflag, 4] = y
                                        flag_buf[nflag, 5] = z
                                        flag_buf[nflag, 6] = u
                                        flag_buf[nflag, 7] = v
                                        flag_buf[nflag, 8] = w
                                    nflag += 1
                                    continue
                                for t in range(ncfg):
                                    if dmask[t, 0] and not _is_s_unit(g2, sprimes[t]):
                                        continue
                                    if dmask[t, 1] and not _is_s_unit(quo2, sprimes[t]):
                                        continue
                                    hist[t, j] += 1
    return hist, nflag, visited
