"""Benchmark the compiled bootstrap kernel against the pure-numpy one.

Times `batch_core` on engine arrays from synthetic datasets at several
scales (small simulation cells up to a clinical-trial sized design) and on a
full `wb_test` call per backend.  Run from the repository root:

    python3 benchmarks/bench_backends.py [--boot B] [--repeats R]
"""

import argparse
import math
import time

import numpy as np

from survconcord import GroupData, fit_groups, one_way_contrast
from survconcord._engine import BootstrapEngine
from survconcord._kernels import compiled_backend, pyref


def synthetic_fits(rng, d, n_per_group, censor_rate=0.4):
    groups = []
    for i in range(d):
        t = rng.lognormal(0.0, 0.3, n_per_group)
        c = rng.exponential(1.0 / censor_rate, n_per_group)
        groups.append(
            GroupData(np.minimum(t, c), (t <= c).astype(int), f"g{i}")
        )
    return fit_groups(groups, math.inf)


def time_call(fn, repeats):
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernel(rng, d, n_per_group, n_boot, repeats):
    fits = synthetic_fits(rng, d, n_per_group)
    engine = BootstrapEngine(fits)
    spec = one_way_contrast(d)
    tg = engine.trace_rows(spec.t)[:, None]
    g = rng.poisson(1.0, size=(n_boot, engine.total_n)) - 1.0
    gev = np.ascontiguousarray(g[:, engine.event_cols])

    results = {}
    results["python"] = time_call(
        lambda: pyref.batch_core(gev, engine.starts, engine.wbg, tg, engine.sqrt_n), repeats
    )
    compiled = compiled_backend()
    if compiled is not None:
        results["c"] = time_call(
            lambda: compiled.batch_core(gev, engine.starts, engine.wbg, tg, engine.sqrt_n),
            repeats,
        )
        z1, d1 = pyref.batch_core(gev, engine.starts, engine.wbg, tg, engine.sqrt_n)
        z2, d2 = compiled.batch_core(gev, engine.starts, engine.wbg, tg, engine.sqrt_n)
        assert np.allclose(z1, z2, rtol=1e-12) and np.allclose(d1, d2, rtol=1e-12)
    return results


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--boot", type=int, default=1999)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(7)
    compiled = compiled_backend()
    print(f"compiled kernels: {'available' if compiled else 'NOT BUILT (numpy only)'}")
    print(f"batch size B = {args.boot}, best of {args.repeats} runs\n")

    scales = [
        ("simulation cell, d=6, n_i=10", 6, 10),
        ("simulation cell, d=6, n_i=30", 6, 30),
        ("moderate trial,  d=6, n_i=70", 6, 70),
        ("large trial,     d=6, n_i=150", 6, 150),
    ]
    header = f"{'scale':32} {'python ms':>10} {'c ms':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for label, d, n in scales:
        res = bench_kernel(rng, d, n, args.boot, args.repeats)
        py_ms = 1e3 * res["python"]
        if "c" in res:
            c_ms = 1e3 * res["c"]
            print(f"{label:32} {py_ms:10.3f} {c_ms:10.3f} {py_ms / c_ms:7.2f}x")
        else:
            print(f"{label:32} {py_ms:10.3f} {'-':>10} {'-':>8}")

    print("\nfull test (fit + covariance + B bootstrap draws), d=6, n_i=30:")
    import os
    import subprocess
    import sys

    for backend in ("python", "c") if compiled else ("python",):
        script = (
            "import numpy as np, math, time, survconcord as sc\n"
            "rng = np.random.default_rng(3)\n"
            "gs = []\n"
            "for i in range(6):\n"
            "    t = rng.lognormal(0, .3, 30); c = rng.exponential(2.5, 30)\n"
            "    gs.append(sc.GroupData(np.minimum(t, c), (t <= c).astype(int)))\n"
            "spec = sc.one_way_contrast(6)\n"
            f"sc.wb_test(gs, spec, n_boot={args.boot}, seed=0)\n"
            "best = min(\n"
            "    (lambda t0: (sc.wb_test(gs, spec, n_boot="
            f"{args.boot}, seed=0), time.perf_counter() - t0)[1])(time.perf_counter())\n"
            "    for _ in range(3)\n"
            ")\n"
            "print(f'  {1e3 * best:.1f} ms')\n"
        )
        env = dict(os.environ, SURVCONCORD_BACKEND=backend)
        out = subprocess.run([sys.executable, "-c", script], env=env, capture_output=True, text=True)
        print(f"  backend={backend}:{out.stdout.rstrip() or out.stderr}")


if __name__ == "__main__":
    main()
