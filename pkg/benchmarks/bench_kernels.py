"""Timing comparison of the compiled hot kernels vs the plain numpy path.

Runs the trajectory rollout and the data-collection kernels on
representative workloads with both backends returned by
hlqr._kernels.kernel_backends() and prints a table of best-of-N wall times.

All numbers are machine-dependent; nothing here is asserted.  With
HLQR_PURE_NUMPY=1 the two backends are the same function and the speedup
column reads 1.0 by construction.

Usage: python benchmarks/bench_kernels.py [--repeat 5] [--csv out.csv]
"""

import argparse
import time

import numpy as np

from hlqr import graphcost, matops, sim
from hlqr._kernels import USING_NUMBA, kernel_backends
from hlqr.fileio import write_csv


def best_time(fn, args, repeat):
    fn(*args)  # warmup (includes jit compilation when applicable)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def rollout_case(n_steps=30_000, dt=1e-3):
    mas, spec, baseline_k, x0 = sim.formation_scenario()
    a, b = mas.a_full, mas.b_full
    p = matops.solve_care(a, b, graphcost.assemble_q(spec), spec.r)
    k = np.linalg.solve(spec.r, b.T @ p)
    m = b.shape[1]
    zeros = np.zeros((2 * n_steps + 1, m))
    q = graphcost.assemble_q(spec)
    args = (a, b, k, zeros, zeros, x0, dt, n_steps, q, spec.r, 1e9, 0.0, 64)
    label = f"rollout {a.shape[0]}-state x {n_steps} steps"
    return label, n_steps, args


def collect_case(n_windows=100, dt=1e-3):
    mas, spec = sim.clique_path_scenario(1, 3)
    dec = graphcost.Decomposition.from_assignment([0, 0, 0])
    a, b = mas.cluster(dec, 0)
    n, m = b.shape
    k0 = np.zeros((m, n))
    steps_per_window = 100
    n_steps = steps_per_window * n_windows
    rng = np.random.default_rng(0)
    exo = 0.5 * rng.standard_normal((2 * n_steps + 1, m))
    x0 = rng.standard_normal(n)
    args = (a, b, k0, exo, np.zeros_like(exo), x0, dt, steps_per_window,
            n_windows, 1e9)
    label = f"collect {n}-state x {n_steps} steps"
    return label, n_steps, args


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5, help="runs per timing")
    ap.add_argument("--csv", help="also write the table to this CSV path")
    opts = ap.parse_args()

    backends = kernel_backends()
    cases = [
        ("rollout", rollout_case()),
        ("collect", collect_case()),
    ]

    print(f"compiled backend active: {USING_NUMBA}")
    header = ["kernel", "workload", "steps", "active_ms", "fallback_ms",
              "speedup", "active_msteps_per_s"]
    rows = []
    for name, (label, n_steps, args) in cases:
        active, fallback = backends[name]
        t_active = best_time(active, args, opts.repeat)
        t_fallback = best_time(fallback, args, opts.repeat)
        rows.append([
            name, label, n_steps, 1e3 * t_active, 1e3 * t_fallback,
            t_fallback / t_active, n_steps / t_active / 1e6,
        ])

    widths = [10, 34, 8, 12, 13, 9, 20]
    print("".join(h.ljust(w) for h, w in zip(header, widths)))
    for row in rows:
        cells = [row[0], row[1], str(row[2]), f"{row[3]:.2f}",
                 f"{row[4]:.2f}", f"{row[5]:.1f}x", f"{row[6]:.2f}"]
        print("".join(c.ljust(w) for c, w in zip(cells, widths)))
    print("timings are best-of-{} on this machine".format(opts.repeat))

    if opts.csv:
        write_csv(opts.csv, header, rows)
        print(f"table written to {opts.csv}")


if __name__ == "__main__":
    main()
