"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Both backends are run on identical inputs and their results are checked for
equality before timings are reported.
"""
import argparse
import sys
import timeit

import numpy as np

from hitforge import _kernels
from hitforge.models.svm import rbf_matrix


def split_case(n, d, seed=0):
    rng = np.random.default_rng(seed)
    X = np.round(rng.standard_normal((n, d)), 2)
    y = (X[:, 0] + 0.5 * rng.standard_normal(n) > 0).astype(np.int64)
    return X, y, np.arange(n, dtype=np.int64), np.arange(d, dtype=np.int64)


def smo_case(n, seed=0):
    rng = np.random.default_rng(seed)
    y = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    X = rng.standard_normal((n, 2))
    X[:, 0] += y
    return rbf_matrix(X, X, 0.1), y


def best_time(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)
    if _kernels.compiled is None:
        print("compiled kernels are not built; run `pip install --no-build-isolation -e .`",
              file=sys.stderr)
        return 1
    backends = {"compiled": _kernels.compiled, "pure": _kernels.pure}
    cases = [(f"best_split n={n} d={d}", "best_split", split_case(n, d))
             for n, d in ((200, 15), (2000, 15))]
    cases += [(f"smo_solve n={n}", "smo_solve", (*smo_case(n), 10.0, 1e-3, 1000, 0))
              for n in (100, 300)]
    print(f"{'case':<26}{'compiled s':>12}{'pure s':>12}{'speedup':>10}")
    for label, name, case in cases:
        results, times = {}, {}
        for bname, mod in backends.items():
            fn = getattr(mod, name)
            results[bname] = fn(*case)
            times[bname] = best_time(lambda: fn(*case), args.repeat)
        a, b = results["compiled"], results["pure"]
        same = a == b if name == "best_split" else (
            np.array_equal(a[0], b[0]) and a[1:] == b[1:])
        if not same:
            print(f"{label}: backends disagree", file=sys.stderr)
            return 1
        c, p = times["compiled"], times["pure"]
        print(f"{label:<26}{c:>12.4f}{p:>12.4f}{p / c:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
