"""Compare the compiled and pure-Python Monte Carlo kernels.

Each workload runs on both backends with identical seeds.  The script checks
that the outputs agree to 1e-12 relative to max(|x|, 1), since the backends
may differ in the last bit of ``pow``, and reports the best wall time of
``--repeat`` runs.

    python benchmarks/bench_kernels.py [--repeat 3] [--scale 1.0] [--json out.json]
"""

from __future__ import annotations

import argparse
import json
import time

import numpy as np

from gwldp import kernels
from gwldp.gw.offspring import OffspringLaw
from gwldp.laws import spectrally_negative, symmetric_pareto
from gwldp.ldp.estimate import simulate_pairs

PARITY_RTOL = 1e-12


def _workloads(scale: float):
    geom = OffspringLaw.geom_shift(0.5)
    binary = OffspringLaw.binary(0.5)
    p15 = symmetric_pareto(1.5)
    reps = max(64, int(20000 * scale))

    def law_draws(backend, law=p15):
        kern = kernels.get(backend)
        return kern.sample_law(law.kernel_vector(), law.kernel_table(), 7, 0,
                               int(10 ** 6 * scale))

    def walk(backend, law=p15):
        kern = kernels.get(backend)
        cps = np.array([10, 100, 1000], dtype=np.int64)
        return kern.walk_checkpoints(law.kernel_vector(), law.kernel_table(), 7, 0,
                                     max(64, int(2000 * scale)), cps)

    def pairs(off, law, n, ratio=False):
        def run(backend):
            z, s = simulate_pairs(off, law, n, reps, 7, 0, 1, backend, ratio=ratio)
            return np.concatenate([z.astype(np.float64), s])
        return run

    return {
        "sample_law pareto(1.5), 1e6 draws": law_draws,
        "walk_checkpoints k<=1000": walk,
        "S_{Z_n} geom m=2, n=8": pairs(geom, p15, 8),
        "S_{Z_n} binary m=1.5, n=10": pairs(binary, spectrally_negative(1.5, 1.8), 10),
        "Z_{n+1}/Z_n geom m=2, n=8": pairs(geom, p15, 8, ratio=True),
    }


def _best(fn, repeat: int):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--scale", type=float, default=1.0, help="workload size multiplier")
    ap.add_argument("--json", help="write the results to this file")
    args = ap.parse_args(argv)
    if kernels.compiled is None:
        print("compiled kernels are not available; nothing to compare")
        return 1
    results = []
    print(f"{'workload':38s} {'compiled s':>11s} {'python s':>10s} {'speedup':>8s}"
          f" {'max diff':>8s}")
    for name, fn in _workloads(args.scale).items():
        tc, oc = _best(lambda: fn("compiled"), args.repeat)
        tp, op = _best(lambda: fn("python"), args.repeat)
        a, b = np.asarray(oc, dtype=np.float64), np.asarray(op, dtype=np.float64)
        rel = float(np.max(np.abs(a - b) / np.maximum(np.abs(a), 1.0), initial=0.0))
        same = bool(rel <= PARITY_RTOL)
        results.append({"workload": name, "compiled_s": tc, "python_s": tp,
                        "speedup": tp / tc, "max_rel_diff": rel, "parity": same})
        print(f"{name:38s} {tc:11.4f} {tp:10.4f} {tp / tc:8.1f} {rel:8.1e}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=2)
    return 0 if all(r["parity"] for r in results) else 2


if __name__ == "__main__":
    raise SystemExit(main())
