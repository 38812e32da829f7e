"""Benchmark the compiled B-spline kernel against the numpy fallback.

Usage:
    python benchmarks/bench_kernels.py [--sizes 10000,100000,1000000] [--repeats 5]

The basis evaluation is the one custom inner loop in the model (everything
else reduces to BLAS matmuls and pocketfft transforms), so this is the
kernel the extension exists for.
"""

import argparse
import time

import numpy as np

from tfkan._kernels import bspline_py
from tfkan.kan import KnotGrid

try:
    from tfkan._kernels import _bspline as compiled
except ImportError:
    compiled = None


def _time(fn, repeats: int) -> float:
    best = np.inf
    for _ in range(repeats):
        started = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - started)
    return best


def run(sizes: list[int], repeats: int) -> None:
    if compiled is None:
        print("compiled kernel not built (run: python setup.py build_ext --inplace);"
              " timing the numpy fallback only")
    header = (f"{'combo':>8} {'n':>9} {'kind':>12} {'numpy (ms)':>11} "
              f"{'compiled (ms)':>14} {'speedup':>8}")
    print(header)
    print("-" * len(header))
    rng = np.random.default_rng(0)
    for size, order in ((2, 1), (4, 2), (5, 3)):
        grid = KnotGrid.uniform(size, order)
        knots = np.asarray(grid.knots)
        for n in sizes:
            x = rng.uniform(-1.2, 1.2, n)
            for kind in ("values", "values+deriv"):
                if kind == "values":
                    t_py = _time(lambda: bspline_py.basis(x, knots, order), repeats)
                    t_cy = (
                        _time(lambda: compiled.basis(x, knots, order, False), repeats)
                        if compiled else None
                    )
                else:
                    t_py = _time(
                        lambda: bspline_py.basis_and_derivative(x, knots, order), repeats
                    )
                    t_cy = (
                        _time(lambda: compiled.basis(x, knots, order, True), repeats)
                        if compiled else None
                    )
                cy = f"{t_cy * 1e3:14.3f}" if t_cy else f"{'-':>14}"
                speedup = f"{t_py / t_cy:8.2f}" if t_cy else f"{'-':>8}"
                print(f"  s={size},k={order} {n:>9} {kind:>12} {t_py * 1e3:11.3f} "
                      f"{cy} {speedup}")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="10000,100000,1000000")
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    run(sizes, args.repeats)


if __name__ == "__main__":
    main()
