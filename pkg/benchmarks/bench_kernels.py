"""Numba vs numpy timings for the signed-distance kernels and a short fit.

Run from the repository root:

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both backends are called directly, so the ``PATCHPOLY_DISABLE_NUMBA``
setting does not matter here; the fit section spawns a subprocess per
backend because the backend is fixed at import time.
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from patchpoly import _kernels as K
from patchpoly.geometry import regular_polygon_triangulation
from patchpoly.gradcheck import random_convex_polygon
from patchpoly.raster import sample_points

FIT_SNIPPET = """
import time, numpy as np
from patchpoly import BACKEND
from patchpoly.fit import FitConfig, fit
from patchpoly.io import synth
y = synth("disk", 64, 64)
fit(y, 5, 8, cfg=FitConfig(iters=1))
t = time.perf_counter()
fit(y, 5, 8, cfg=FitConfig(iters=50))
print(BACKEND, time.perf_counter() - t)
"""


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def bench_kernels(repeat):
    rng = np.random.default_rng(0)
    print(f"{'case':28s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s} {'max |diff|':>11s}")
    for n_poly, k, side, q in [(64, 5, 8, 4), (256, 5, 8, 4), (64, 16, 16, 4), (16, 24, 32, 2)]:
        tri = regular_polygon_triangulation(k)
        edges, opposite = tri.edge_table()
        tris = tri.as_array()
        verts = np.stack([random_convex_polygon(rng, k) for _ in range(n_poly)])
        pts = sample_points(side, q)
        weights = rng.normal(size=(n_poly, len(pts)))
        args = (verts, pts, tris, edges, opposite)

        # warm the JIT before timing
        K.signed_distance_numba(*args)
        K.signed_distance_vjp_numba(*args, weights)

        for name, f_np, f_nb, extra in [
            ("distance", K.signed_distance_numpy, K.signed_distance_numba, ()),
            ("vjp", K.signed_distance_vjp_numpy, K.signed_distance_vjp_numba, (weights,)),
        ]:
            t_np = best_of(lambda: f_np(*args, *extra), repeat)
            t_nb = best_of(lambda: f_nb(*args, *extra), repeat)
            diff = np.abs(f_np(*args, *extra) - f_nb(*args, *extra)).max()
            label = f"{name} N={n_poly} k={k} {side * q}^2"
            print(f"{label:28s} {1e3 * t_np:10.2f} {1e3 * t_nb:10.2f} {t_np / t_nb:8.1f} {diff:11.2e}")


def bench_fit():
    print("\n50-iteration fit, 64x64 disk, k=5, s=8")
    for disabled in ("1", "0"):
        env = dict(os.environ, PATCHPOLY_DISABLE_NUMBA=disabled)
        out = subprocess.run([sys.executable, "-c", FIT_SNIPPET], env=env,
                             capture_output=True, text=True, check=True).stdout.split()
        print(f"  {out[0]:6s} {float(out[1]):7.2f} s")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--skip-fit", action="store_true")
    args = parser.parse_args()
    if not K.HAVE_NUMBA:
        sys.exit("numba is not installed; nothing to compare")
    bench_kernels(args.repeat)
    if not args.skip_fit:
        bench_fit()


if __name__ == "__main__":
    main()
