"""Independent reference implementations used by the unit and acceptance tests."""
from fractions import Fraction

import numpy as np


def fraction_gini(labels) -> Fraction:
    n = len(labels)
    p1 = Fraction(sum(labels), n)
    return 1 - p1 * p1 - (1 - p1) * (1 - p1)


def midpoint(lo: float, hi: float) -> float:
    thr = (lo + hi) / 2.0
    return thr if thr < hi else lo


def brute_force_split(X, y, rows, features):
    """Exhaustive (feature, threshold) scan with exact rational Gini."""
    labels = [int(y[r]) for r in rows]
    parent = fraction_gini(labels)
    best = None
    for f in sorted(features):
        values = sorted({float(X[r, f]) for r in rows})
        for lo, hi in zip(values, values[1:]):
            thr = midpoint(lo, hi)
            left = [int(y[r]) for r in rows if X[r, f] <= thr]
            right = [int(y[r]) for r in rows if X[r, f] > thr]
            n = len(rows)
            w = Fraction(len(left), n) * fraction_gini(left) + \
                Fraction(len(right), n) * fraction_gini(right)
            if best is None or w < best[0]:
                best = (w, f, thr)
    if best is None or not best[0] < parent:
        return None
    return best[1], best[2], parent - best[0]


def cart_tree(X, y, min_samples_split=2):
    """Fully grown CART tree as nested tuples: ('leaf', n0, n1) or
    ('split', feature, threshold, left, right)."""
    d = X.shape[1]

    def grow(rows):
        n1 = sum(int(y[r]) for r in rows)
        n0 = len(rows) - n1
        if len(rows) < min_samples_split or n0 == 0 or n1 == 0:
            return ("leaf", n0, n1)
        s = brute_force_split(X, y, rows, range(d))
        if s is None:
            return ("leaf", n0, n1)
        f, thr, _ = s
        return ("split", f, thr, grow([r for r in rows if X[r, f] <= thr]),
                grow([r for r in rows if X[r, f] > thr]))

    return grow(list(range(X.shape[0])))


def tree_as_nested(tree, node=0):
    """Convert the flat preorder arrays of a fitted tree to cart_tree's shape."""
    f = int(tree.feature[node])
    if f < 0:
        return ("leaf", int(tree.counts[node, 0]), int(tree.counts[node, 1]))
    return ("split", f, float(tree.threshold[node]),
            tree_as_nested(tree, int(tree.left[node])),
            tree_as_nested(tree, int(tree.right[node])))


def logreg_nll_ld(beta, X, y):
    """Logistic negative log-likelihood in extended precision."""
    beta = np.asarray(beta, dtype=np.longdouble)
    z = beta[0] + np.asarray(X, dtype=np.longdouble) @ beta[1:]
    return np.sum(np.logaddexp(np.longdouble(0), z) - np.asarray(y, dtype=np.longdouble) * z)


def mlp_loss_ld(flat, X, y, d, hidden):
    """Mean cross-entropy of a one-hidden-layer ReLU net, written out directly
    in extended precision. Layout: W1 (hidden x d), b1, w2, b2."""
    flat = np.asarray(flat, dtype=np.longdouble)
    h = hidden
    W1 = flat[:h * d].reshape(h, d)
    b1 = flat[h * d:h * d + h]
    w2 = flat[h * d + h:h * d + 2 * h]
    b2 = flat[h * d + 2 * h]
    X = np.asarray(X, dtype=np.longdouble)
    y = np.asarray(y, dtype=np.longdouble)
    hidden_out = np.maximum(X @ W1.T + b1, 0)
    z = hidden_out @ w2 + b2
    return np.mean(np.logaddexp(np.longdouble(0), z) - y * z)


def central_difference(fn, x, h=1e-6):
    """Central differences; evaluates ``fn`` at extended-precision points so
    round-off stays far below the O(h^2) truncation error."""
    x = np.array(x, dtype=np.longdouble)
    g = np.zeros(x.shape, dtype=np.float64)
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = h
        g.flat[i] = float((fn(x + e) - fn(x - e)) / (2 * np.longdouble(h)))
    return g


def max_relative_error(analytic, numeric) -> float:
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / scale))


def random_feasible_alpha(rng, y, C):
    """A uniformly scaled point with 0 <= alpha <= C and sum(alpha * y) = 0."""
    pos, neg = y > 0, y < 0
    a = rng.uniform(0, C, size=y.size)
    sp, sn = a[pos].sum(), a[neg].sum()
    if sp > sn:
        a[pos] *= sn / sp
    else:
        a[neg] *= sp / sn
    return a
