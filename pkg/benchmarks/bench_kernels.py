"""Compare the numba and numpy backends of the hot loops.

Run with ``python benchmarks/bench_kernels.py``. The first numba call is
excluded from timings (JIT warm-up).
"""
import argparse
import time

import numpy as np

import roughflows as rf
from roughflows import kernels


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_compose(family, n_points, n_cells, repeat):
    box = np.array([[-1.0, 1.0], [-1.0, 1.0]])
    weights = [0.1, 0.1, 0.1]
    if family == "trig":
        basis = rf.ModeBasis.trigonometric(2, 3, weights, box)
    elif family == "gauss":
        basis = rf.ModeBasis.gaussian(2, 3, weights, box)
    else:
        basis = rf.ModeBasis.algebraic(2, 3, 1.5, weights, box)
    kp = basis.kernel_params()
    rng = np.random.default_rng(0)
    b = rng.normal(scale=0.05, size=(n_cells, 3))
    a = rng.normal(scale=0.01, size=(n_cells, 3, 3))
    a = a - np.swapaxes(a, 1, 2)
    x0 = rng.uniform(-1, 1, (n_points, 2))

    def run(backend):
        return lambda: kernels.compose_chain(x0, b, a, *kp, n_sub=8, backend=backend)

    run("numba")()
    return best_of(run("numba"), repeat), best_of(run("numpy"), repeat)


def bench_levy(n_steps, dim, repeat):
    x = np.cumsum(np.random.default_rng(1).normal(size=(n_steps + 1, dim)), axis=0)
    kernels.levy_area_cumulative(x[:10], backend="numba")
    return (best_of(lambda: kernels.levy_area_cumulative(x, backend="numba"), repeat),
            best_of(lambda: kernels.levy_area_cumulative(x, backend="numpy"), repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=256)
    ap.add_argument("--cells", type=int, default=256)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    print(f"{'kernel':<28}{'numba [s]':>12}{'numpy [s]':>12}{'speed-up':>10}")
    for family in ("trig", "gauss", "algebraic"):
        tn, tp = bench_compose(family, args.points, args.cells, args.repeat)
        print(f"{'compose_chain/' + family:<28}{tn:12.4f}{tp:12.4f}{tp / tn:10.1f}")
    tn, tp = bench_levy(2**16, 3, args.repeat)
    print(f"{'levy_area_cumulative':<28}{tn:12.4f}{tp:12.4f}{tp / tn:10.1f}")


if __name__ == "__main__":
    main()
