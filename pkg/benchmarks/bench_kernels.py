"""Compare the numba kernels with their numpy fallbacks.

Usage: python3 benchmarks/bench_kernels.py [--repeat 5] [--n 2000] [--count 41]

Both backends are imported in the same process and fed identical inputs; the
script reports the best-of-repeat wall time, the speedup and the largest
absolute difference between the two outputs.
"""
import argparse
import time

import numpy as np

from gansets import _accel, testbed
from gansets.grid import build_grid


def best_time(fn, repeat):
    fn()  # warm-up (includes jit compilation for the numba path)
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def cases(n, count, m):
    tp = testbed.make_two_point_problem(1.0, 0.2, 1.0)
    grid = testbed.two_point_grid(tp, count)
    data = testbed.generate_dataset(tp, n, 1)
    args = (data.x, data.z, grid.gamma_points, grid.delta_points)
    yield ("surface two_point", lambda: _accel.surface_mean_numba(tp.scalar_kernel, *args),
           lambda: _accel.surface_mean_numpy(tp.kernel, *args))

    lg = testbed.make_logistic_gan_problem()
    lgrid = build_grid(lg.box, (9, 9, 9, 9))
    ldata = testbed.generate_dataset(lg, max(n // 4, 10), 2)
    largs = (ldata.x, ldata.z, lgrid.gamma_points, lgrid.delta_points)
    yield ("surface logistic 9^4", lambda: _accel.surface_mean_numba(lg.scalar_kernel, *largs),
           lambda: _accel.surface_mean_numpy(lg.kernel, *largs))

    r = np.random.default_rng(0)
    stack = r.normal(size=(m, count, count))
    yield ("criterion stack", lambda: _accel.criterion_numba(stack)[2],
           lambda: _accel.criterion_numpy(stack)[2])

    vals = np.abs(r.normal(size=(m, count * count)))
    mask = r.random(count * count) < 0.3
    yield ("masked row max", lambda: _accel.masked_row_max_numba(vals, mask),
           lambda: _accel.masked_row_max_numpy(vals, mask))

    a, b = r.normal(size=(count * count, 2)), r.normal(size=(200, 2))
    yield ("min distance", lambda: _accel.min_dist_numba(a, b),
           lambda: _accel.min_dist_numpy(a, b))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--n", type=int, default=2000, help="rows per dataset")
    ap.add_argument("--count", type=int, default=41, help="grid points per axis (two-point)")
    ap.add_argument("--m", type=int, default=200, help="stacked surfaces (subsamples)")
    args = ap.parse_args(argv)
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    print(f"{'kernel':<22}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}{'max |diff|':>13}")
    for name, nb, npf in cases(args.n, args.count, args.m):
        t_nb, out_nb = best_time(nb, args.repeat)
        t_np, out_np = best_time(npf, args.repeat)
        diff = float(np.max(np.abs(np.asarray(out_nb) - np.asarray(out_np))))
        print(f"{name:<22}{1e3 * t_nb:>12.2f}{1e3 * t_np:>12.2f}{t_np / t_nb:>10.1f}{diff:>13.2e}")


if __name__ == "__main__":
    main()
