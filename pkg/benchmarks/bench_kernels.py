"""Time the compiled kernels against the numpy fallback on image-sized inputs.

    python3 benchmarks/bench_kernels.py --n 16384 --k 5
"""
import argparse
import timeit

import numpy as np

from lddp import _fallback

try:
    from lddp import _core
except ImportError:
    _core = None


def cases(n, k, rng):
    locs = rng.random((n, 2))
    marks = rng.random((max(1, n // 20), 2))
    f = rng.normal(0, 1, (k, n))
    ez = rng.uniform(0.5, 2, k)
    xi = rng.uniform(0.5, 2, n)
    logits = rng.normal(0, 5, (n, k))
    x = rng.random((n, 3))
    m = rng.random((k, 3))
    w = np.tile(np.eye(3), (k, 1, 1))
    labels_a = rng.integers(0, k, n)
    labels_b = rng.integers(0, k, n)
    return {
        "sq_exp_cross": (marks, locs, 1.0, 0.1),
        "softmax_rows": (logits,),
        "mixing_normalizer": (ez, f),
        "exp_over_xi_sums": (f, xi),
        "mahalanobis_sq": (x, m, w),
        "nearest_centroid": (x, m),
        "contingency": (labels_a, labels_b, k, k),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=16384, help="number of points")
    ap.add_argument("--k", type=int, default=5, help="number of clusters")
    ap.add_argument("--repeat", type=int, default=5, help="timing repeats (best is kept)")
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"n={args.n} k={args.k}")
    print(f"{'kernel':<20}{'numpy ms':>12}{'cython ms':>12}{'speedup':>10}")
    for name, call_args in cases(args.n, args.k, rng).items():
        def best(fn):
            return 1e3 * min(timeit.repeat(lambda: fn(*call_args), number=1,
                                           repeat=args.repeat))
        py = best(getattr(_fallback, name))
        if _core is None:
            print(f"{name:<20}{py:>12.3f}{'n/a':>12}{'':>10}")
            continue
        cy = best(getattr(_core, name))
        print(f"{name:<20}{py:>12.3f}{cy:>12.3f}{py / cy:>9.1f}x")


if __name__ == "__main__":
    main()
