# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: Gini split search and the SMO inner loop.

Semantics match ``_pykernels`` exactly; see that module for documentation.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()

cdef extern from *:
    ctypedef long long int128 "__int128"

ctypedef unsigned long long u64


cdef inline bint _gt(int128 num1, int128 den1, int128 num2, int128 den2) noexcept nogil:
    return num1 * den2 > num2 * den1


def best_split(X, y, rows, features):
    cdef cnp.ndarray r_arr = np.ascontiguousarray(rows, dtype=np.intp)
    cdef cnp.intp_t[::1] r = r_arr
    cdef long long[::1] yl = np.ascontiguousarray(y, dtype=np.int64)
    cdef Py_ssize_t n = r.shape[0]
    if n < 2:
        return None
    cdef long long a1 = 0, a0
    cdef Py_ssize_t i, k
    for i in range(n):
        a1 += yl[r[i]]
    a0 = n - a1
    if a0 == 0 or a1 == 0:
        return None

    Xa = np.asarray(X, dtype=np.float64)
    cdef double[::1] vs
    cdef cnp.intp_t[::1] order
    cdef int128 best_num = 0, best_den = 1, num, den
    cdef bint have_best = False
    cdef Py_ssize_t best_f = -1
    cdef double best_lo = 0.0, best_hi = 0.0
    cdef long long l1, l0, r1, r0, nl, nr
    for f in sorted(int(f) for f in features):
        # numpy's stable argsort beats a comparator-driven qsort here
        col = Xa[r_arr, f]
        order_arr = np.argsort(col, kind="stable")
        order = order_arr
        vs = np.ascontiguousarray(col[order_arr])
        l1 = 0
        for k in range(n - 1):
            l1 += yl[r[order[k]]]
            if not vs[k] < vs[k + 1]:
                continue
            nl = k + 1
            nr = n - nl
            l0 = nl - l1
            r1 = a1 - l1
            r0 = nr - r1
            num = (<int128>(l0 * l0 + l1 * l1)) * nr + (<int128>(r0 * r0 + r1 * r1)) * nl
            den = (<int128>nl) * nr
            if not have_best or _gt(num, den, best_num, best_den):
                have_best = True
                best_num = num
                best_den = den
                best_f = f
                best_lo = vs[k]
                best_hi = vs[k + 1]

    if not have_best:
        return None
    cdef long long parent = a0 * a0 + a1 * a1
    if best_num * n <= (<int128>parent) * best_den:
        return None
    cdef double thr = (best_lo + best_hi) / 2.0
    if not thr < best_hi:
        thr = best_lo
    cdef double decrease = (<double>best_num / <double>best_den
                            - <double>parent / <double>n) / <double>n
    return int(best_f), float(thr), float(decrease)


cdef inline u64 _xs_next(u64* state) noexcept nogil:
    cdef u64 x = state[0]
    x ^= x >> 12
    x ^= x << 25
    x ^= x >> 27
    state[0] = x
    return x * <u64>0x2545F4914F6CDD1DULL


cdef bint _take_step(double[:, ::1] K, double[::1] y, double[::1] alpha,
                     double[::1] E, double b, double C, Py_ssize_t i, Py_ssize_t j,
                     double* b_out) noexcept nogil:
    cdef Py_ssize_t n = y.shape[0], k
    cdef double Ei, Ej, yi, yj, ai_old, aj_old, L, H, Kij, Kii, Kjj, eta
    cdef double ai, aj, di, dj, b1, b2, bn, db, snap
    if i == j:
        return False
    Ei = E[i]
    Ej = E[j]
    yi = y[i]
    yj = y[j]
    ai_old = alpha[i]
    aj_old = alpha[j]
    if yi != yj:
        L = aj_old - ai_old
        if L < 0.0:
            L = 0.0
        H = C + aj_old - ai_old
        if H > C:
            H = C
    else:
        L = ai_old + aj_old - C
        if L < 0.0:
            L = 0.0
        H = ai_old + aj_old
        if H > C:
            H = C
    if H - L < 1e-12:
        return False
    Kij = K[i, j]
    Kii = K[i, i]
    Kjj = K[j, j]
    eta = 2.0 * Kij - Kii - Kjj
    if eta >= 0.0:
        return False
    aj = aj_old - yj * (Ei - Ej) / eta
    if aj > H:
        aj = H
    elif aj < L:
        aj = L
    snap = 1e-12 * C
    if aj < snap:
        aj = 0.0
    elif aj > C - snap:
        aj = C
    if fabs(aj - aj_old) < 1e-12:
        return False
    ai = ai_old + yi * yj * (aj_old - aj)
    if ai < snap:
        ai = 0.0
    elif ai > C - snap:
        ai = C
    di = yi * (ai - ai_old)
    dj = yj * (aj - aj_old)
    b1 = b - Ei - di * Kii - dj * Kij
    b2 = b - Ej - di * Kij - dj * Kjj
    if 0.0 < ai and ai < C:
        bn = b1
    elif 0.0 < aj and aj < C:
        bn = b2
    else:
        bn = (b1 + b2) / 2.0
    db = bn - b
    for k in range(n):
        E[k] = E[k] + ((di * K[i, k] + dj * K[j, k]) + db)
    alpha[i] = ai
    alpha[j] = aj
    b_out[0] = bn
    return True


def smo_solve(K_in, y_in, double C, double tol, long long max_passes, seed):
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] Karr = np.ascontiguousarray(K_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] yarr = np.ascontiguousarray(y_in, dtype=np.float64)
    cdef double[:, ::1] K = Karr
    cdef double[::1] y = yarr
    cdef Py_ssize_t n = y.shape[0]
    alpha_arr = np.zeros(n)
    E_arr = np.zeros(n)
    free_arr = np.zeros(n, dtype=np.intp)
    cdef double[::1] alpha = alpha_arr
    cdef double[::1] E = E_arr
    cdef cnp.intp_t[::1] free = free_arr
    cdef double b = 0.0, bn = 0.0, rr, gap, best_gap
    cdef u64 state = (<u64>(int(seed) & 0xFFFFFFFFFFFFFFFF))
    if state == 0:
        state = <u64>0x9E3779B97F4A7C15ULL
    cdef long long passes = 0
    cdef bint converged = False, stepped
    cdef Py_ssize_t i, k, m, nfree, start, best_j, violators

    while passes < max_passes:
        passes += 1
        # same BLAS call as the fallback so both backends see identical caches
        E_arr[:] = Karr @ (alpha_arr * yarr) + b - yarr
        violators = 0
        with nogil:
            for i in range(n):
                rr = y[i] * E[i]
                if not ((rr < -tol and alpha[i] < C) or (rr > tol and alpha[i] > 0.0)):
                    continue
                violators += 1
                nfree = 0
                for k in range(n):
                    if alpha[k] > 0.0 and alpha[k] < C:
                        free[nfree] = k
                        nfree += 1
                stepped = False
                if nfree > 1:
                    best_j = free[0]
                    best_gap = fabs(E[i] - E[free[0]])
                    for m in range(1, nfree):
                        gap = fabs(E[i] - E[free[m]])
                        if gap > best_gap:
                            best_gap = gap
                            best_j = free[m]
                    stepped = _take_step(K, y, alpha, E, b, C, i, best_j, &bn)
                if not stepped and nfree > 0:
                    start = <Py_ssize_t>(_xs_next(&state) % <u64>nfree)
                    for m in range(nfree):
                        stepped = _take_step(K, y, alpha, E, b, C, i,
                                             free[(start + m) % nfree], &bn)
                        if stepped:
                            break
                if not stepped:
                    start = <Py_ssize_t>(_xs_next(&state) % <u64>n)
                    for m in range(n):
                        stepped = _take_step(K, y, alpha, E, b, C, i, (start + m) % n, &bn)
                        if stepped:
                            break
                if stepped:
                    b = bn
        if violators == 0:
            converged = True
            break
    return alpha_arr, b, passes, converged
