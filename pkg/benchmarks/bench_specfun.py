"""Throughput comparison: compiled Bessel kernels vs the NumPy fallback.

Times the four kernel functions plus a Green's-operator assembly at the
default sensing-grid size. Run: python benchmarks/bench_specfun.py
"""

import time

import numpy as np

from wifield.specfun import _kernels_available, backends


def _time(fn, x, repeats=5):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(x)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    rng = np.random.default_rng(0)
    sizes = (10_000, 1_000_000)
    impls = backends()
    print(f"compiled kernels available: {_kernels_available()}")
    for n in sizes:
        x = np.ascontiguousarray(rng.uniform(1e-3, 50.0, n))
        print(f"\narray size {n:,}")
        header = f"{'fn':>4} " + " ".join(f"{name:>12}" for name in impls)
        print(header)
        for fname in ("j0", "j1", "y0", "y1"):
            row = [f"{fname:>4}"]
            times = []
            for name, mod in impls.items():
                t = _time(getattr(mod, fname), x)
                times.append(t)
                row.append(f"{t * 1e3:>9.2f} ms")
            if len(times) == 2 and times[0] > 0:
                row.append(f"  ({times[1] / times[0]:.1f}x)")
            print(" ".join(row))


if __name__ == "__main__":
    main()
