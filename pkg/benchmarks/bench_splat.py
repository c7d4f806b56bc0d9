"""Z-buffer splat: numba loop kernel vs the vectorised numpy fallback.

    python benchmarks/bench_splat.py [--points 20000 50000] [--repeat 5]

Both kernels must agree exactly; timings are best-of-``repeat`` after a
warm-up call (which also triggers JIT compilation).
"""
import argparse
import time

import numpy as np

from graspview import _kernels
from graspview._jit import USE_NUMBA


def _case(n, h, w, rng):
    px = rng.integers(-2, w + 2, n)
    py = rng.integers(-2, h + 2, n)
    z = rng.uniform(0.05, 1.0, n)
    return px, py, z


def _best(fn, args, repeat):
    fn(*args)
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--points", type=int, nargs="+", default=[1000, 20000, 100000])
    ap.add_argument("--radius", type=int, default=1)
    ap.add_argument("--size", type=int, nargs=2, default=[120, 160], metavar=("H", "W"))
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not USE_NUMBA:
        print("numba disabled (GRASPVIEW_NO_NUMBA); only the numpy kernel is timed")
    rng = np.random.default_rng(0)
    h, w = args.size
    print(f"{'points':>8} {'numba ms':>10} {'numpy ms':>10} {'speedup':>8}")
    for n in args.points:
        case = (*_case(n, h, w, rng), h, w, args.radius)
        t_np = _best(_kernels.splat_numpy, case, args.repeat)
        if USE_NUMBA:
            a, b = _kernels.splat_loops(*case), _kernels.splat_numpy(*case)
            assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
            t_nb = _best(_kernels.splat_loops, case, args.repeat)
            print(f"{n:>8} {1e3 * t_nb:>10.3f} {1e3 * t_np:>10.3f} {t_np / t_nb:>7.1f}x")
        else:
            print(f"{n:>8} {'-':>10} {1e3 * t_np:>10.3f} {'-':>8}")


if __name__ == "__main__":
    main()
