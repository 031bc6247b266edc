"""Pure-Python/numpy implementations of the hot kernels.

These mirror ``_ckernels.pyx`` operation for operation so that both
backends return identical splits and identical SMO iterates.
"""
import numpy as np

_MASK64 = (1 << 64) - 1


class XorShift64:
    """xorshift64* stream shared (bit for bit) with the compiled backend."""

    def __init__(self, seed):
        self.state = (int(seed) & _MASK64) or 0x9E3779B97F4A7C15

    def next(self):
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & _MASK64
        x ^= x >> 27
        self.state = x
        return (x * 0x2545F4914F6CDD1D) & _MASK64


def _split_score(l0, l1, r0, r1):
    # Child-weighted Gini is n - S/..., so maximising S = sum_c (counts^2 / size)
    # minimises it. Kept as an exact fraction num/den.
    nl = l0 + l1
    nr = r0 + r1
    return (l0 * l0 + l1 * l1) * nr + (r0 * r0 + r1 * r1) * nl, nl * nr


def best_split(X, y, rows, features):
    """Best Gini split of ``X[rows]`` over ``features``.

    Returns ``(feature, threshold, impurity_decrease)`` or ``None`` when no
    candidate threshold strictly lowers the child-weighted impurity. Ties go
    to the lowest feature index, then the lowest threshold.
    """
    rows = np.asarray(rows, dtype=np.intp)
    n = rows.shape[0]
    if n < 2:
        return None
    yy = y[rows].astype(np.int64)
    a1 = int(yy.sum())
    a0 = n - a1
    if a0 == 0 or a1 == 0:
        return None

    best = None  # (num, den, feature, k, sorted values)
    for f in sorted(int(f) for f in features):
        v = X[rows, f]
        order = np.argsort(v, kind="stable")
        vs = v[order]
        ys = yy[order]
        ks = np.nonzero(vs[:-1] < vs[1:])[0]
        if ks.size == 0:
            continue
        cum1 = np.cumsum(ys)[ks]
        nl = ks + 1
        l1 = cum1
        l0 = nl - l1
        r1 = a1 - l1
        r0 = (n - nl) - r1
        nr = n - nl
        approx = ((l0 * l0 + l1 * l1).astype(np.float64) / nl
                  + (r0 * r0 + r1 * r1).astype(np.float64) / nr)
        top = approx.max()
        near = np.nonzero(approx >= top - 1e-9 * abs(top))[0]
        cand = None
        for c in near:
            num, den = _split_score(int(l0[c]), int(l1[c]), int(r0[c]), int(r1[c]))
            if cand is None or num * cand[1] > cand[0] * den:
                cand = (num, den, int(ks[c]))
        if best is None or cand[0] * best[1] > best[0] * cand[1]:
            best = (cand[0], cand[1], f, cand[2], vs)

    if best is None:
        return None
    num, den, f, k, vs = best
    parent = a0 * a0 + a1 * a1
    if num * n <= parent * den:
        return None
    lo, hi = float(vs[k]), float(vs[k + 1])
    thr = (lo + hi) / 2.0
    if not thr < hi:
        thr = lo
    decrease = (float(num) / float(den) - float(parent) / float(n)) / float(n)
    return f, thr, decrease


def _take_step(K, y, alpha, E, b, C, i, j):
    """Jointly optimise alpha[i], alpha[j]; returns the new bias or None."""
    if i == j:
        return None
    Ei = E[i]
    Ej = E[j]
    yi = y[i]
    yj = y[j]
    ai_old = alpha[i]
    aj_old = alpha[j]
    if yi != yj:
        L = max(0.0, aj_old - ai_old)
        H = min(C, C + aj_old - ai_old)
    else:
        L = max(0.0, ai_old + aj_old - C)
        H = min(C, ai_old + aj_old)
    if H - L < 1e-12:
        return None
    Kij = K[i, j]
    Kii = K[i, i]
    Kjj = K[j, j]
    eta = 2.0 * Kij - Kii - Kjj
    if eta >= 0.0:
        return None
    aj = aj_old - yj * (Ei - Ej) / eta
    if aj > H:
        aj = H
    elif aj < L:
        aj = L
    # snap rounding residue onto the box so bound multipliers are exact
    snap = 1e-12 * C
    if aj < snap:
        aj = 0.0
    elif aj > C - snap:
        aj = C
    if abs(aj - aj_old) < 1e-12:
        return None
    ai = ai_old + yi * yj * (aj_old - aj)
    if ai < snap:
        ai = 0.0
    elif ai > C - snap:
        ai = C
    di = yi * (ai - ai_old)
    dj = yj * (aj - aj_old)
    b1 = b - Ei - di * Kii - dj * Kij
    b2 = b - Ej - di * Kij - dj * Kjj
    if 0.0 < ai < C:
        bn = b1
    elif 0.0 < aj < C:
        bn = b2
    else:
        bn = (b1 + b2) / 2.0
    E += di * K[i] + dj * K[j] + (bn - b)
    alpha[i] = ai
    alpha[j] = aj
    return bn


def smo_solve(K, y, C, tol, max_passes, seed):
    """SMO over a precomputed kernel matrix.

    Every pass visits each multiplier; a KKT violator (at ``tol``) is paired
    with the partner maximising ``|E_i - E_j|``, then, failing progress, with
    each free multiplier and finally every multiplier, scanning from a seeded
    random start. Returns ``(alpha, b, passes, converged)``. The error cache
    is rebuilt from scratch each pass; a pass with no violator ends the solve.
    """
    K = np.ascontiguousarray(K, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n = y.shape[0]
    alpha = np.zeros(n)
    b = 0.0
    rng = XorShift64(seed)
    passes = 0
    converged = False
    while passes < max_passes:
        passes += 1
        E = K @ (alpha * y) + b - y
        violators = 0
        for i in range(n):
            r = y[i] * E[i]
            if not ((r < -tol and alpha[i] < C) or (r > tol and alpha[i] > 0.0)):
                continue
            violators += 1
            free = np.nonzero((alpha > 0.0) & (alpha < C))[0]
            bn = None
            if free.size > 1:
                gap = np.abs(E[i] - E[free])
                bn = _take_step(K, y, alpha, E, b, C, i, int(free[np.argmax(gap)]))
            if bn is None and free.size > 0:
                start = int(rng.next() % free.size)
                for k in range(free.size):
                    bn = _take_step(K, y, alpha, E, b, C, i, int(free[(start + k) % free.size]))
                    if bn is not None:
                        break
            if bn is None:
                start = int(rng.next() % n)
                for k in range(n):
                    bn = _take_step(K, y, alpha, E, b, C, i, (start + k) % n)
                    if bn is not None:
                        break
            if bn is not None:
                b = bn
        if violators == 0:
            converged = True
            break
    return alpha, b, passes, converged
