"""Compare the compiled kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeat 5] [--out results.csv]

Each kernel is timed on both backends with identical inputs; the largest
absolute difference between the two outputs is reported alongside.
"""
import argparse
import csv
import sys
import timeit

import numpy as np

from lejaexp import _kernels
from lejaexp.leja import DEFAULT_GRID_RESOLUTION, TIE_ATOL, default_leja


def cases(rng):
    n = 256
    u = rng.standard_normal(n)
    inv_h2, inv_6h = float(n * n), n / 6.0
    grid_m = 20000
    grid = 2.0 * (2.0 * np.arange(grid_m + 1) - grid_m) / grid_m
    nodes = default_leja(200).points.astype(np.complex128)
    return [
        ("laplacian n=256", lambda k: k.laplacian(u, inv_h2)),
        ("upwind3 n=256", lambda k: k.upwind3(u, inv_6h, 1)),
        ("burgers_rhs n=256", lambda k: k.burgers_rhs(u, inv_h2, 5.0, inv_6h, -1)),
        ("allen_cahn_rhs n=256", lambda k: k.allen_cahn_rhs(u, inv_h2, 100.0)),
        ("leja_greedy 64 nodes", lambda k: k.leja_greedy(grid, 64, TIE_ATOL)),
        ("dd_taylor_exp 200 nodes b=-40",
         lambda k: k.dd_taylor_exp(nodes, -40.0 + 0j, 1.0 + 0j, 1e-18, 2000)[0]),
    ]


def run(repeat):
    backends = _kernels.available_backends()
    rng = np.random.default_rng(7)
    rows = []
    for name, fn in cases(rng):
        times, outs = {}, {}
        for b in backends:
            mod = _kernels.get_backend(b)
            outs[b] = np.asarray(fn(mod))
            number = 1 if "greedy" in name else 200
            best = min(timeit.repeat(lambda: fn(mod), number=number, repeat=repeat)) / number
            times[b] = best
        diff = 0.0
        if len(backends) > 1:
            diff = float(np.max(np.abs(outs["cython"] - outs["python"])))
        speedup = times["python"] / times["cython"] if "cython" in times else float("nan")
        rows.append((name, times.get("cython", float("nan")), times["python"], speedup, diff))
    return rows


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--out", help="optional CSV file")
    args = parser.parse_args(argv)
    if "cython" not in _kernels.available_backends():
        print("compiled kernels are not built; only the numpy fallback is available",
              file=sys.stderr)
    rows = run(args.repeat)
    print(f"{'kernel':32s} {'cython [s]':>12s} {'python [s]':>12s} {'speedup':>8s} {'max diff':>10s}")
    for name, tc, tp, sp, diff in rows:
        print(f"{name:32s} {tc:12.3e} {tp:12.3e} {sp:8.1f} {diff:10.2e}")
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["kernel", "cython_seconds", "python_seconds", "speedup", "max_abs_diff"])
            w.writerows(rows)
    print(f"default grid resolution for node generation: {DEFAULT_GRID_RESOLUTION}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
