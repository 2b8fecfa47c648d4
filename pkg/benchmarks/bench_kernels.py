"""Time the numba and numpy backends of the hot kernels on the same inputs.

    python3 benchmarks/bench_kernels.py [--points 4001] [--repeat 5]

The first numba call compiles (or loads the on-disk cache); it is excluded
from the timings by a warm-up call.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from qeskit import kernels
from qeskit._accel import HAVE_NUMBA
from qeskit.grid import Grid
from qeskit.solver import DiscreteOperator, lowest_eigenpairs


def best_of(fn, repeat: int) -> float:
    fn()
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def cases(points: int):
    g = Grid(10.0, points)
    op = DiscreteOperator(g, 0.5 * g.x**2)
    d, o = op.diagonal, op.off_diagonal
    rhs = np.random.default_rng(42).standard_normal(d.shape[0])
    y = np.linspace(-8.0, 8.0, points)
    return {
        "sturm_count": lambda be: kernels.sturm_count(d, o, 10.0, backend=be),
        "lowest_eigenvalues(k=4)": lambda be: kernels.lowest_eigenvalues(d, o, 4, backend=be),
        "solve_tridiagonal": lambda be: kernels.solve_tridiagonal(o, d - 0.3, o, rhs, backend=be),
        "hermite_imag_ratios(n=3)": lambda be: kernels.hermite_imag_ratios(3, y, backend=be),
        "lowest_eigenpairs(k=3)": lambda be: lowest_eigenpairs(op, 3, backend=be),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--points", type=int, default=4001)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    backends = ["numpy"] + (["numba"] if HAVE_NUMBA else [])
    print(f"N = {args.points}, best of {args.repeat}")
    print(f"{'kernel':28s}" + "".join(f"{b:>12s}" for b in backends) + ("     speedup" if len(backends) == 2 else ""))
    for name, fn in cases(args.points).items():
        t = {b: best_of(lambda: fn(b), args.repeat) for b in backends}
        row = f"{name:28s}" + "".join(f"{t[b] * 1e3:10.3f}ms" for b in backends)
        if len(backends) == 2:
            row += f"{t['numpy'] / t['numba']:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
