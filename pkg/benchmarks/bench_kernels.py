"""Compare the compiled and pure-numpy transfer kernels.

Usage: python3 benchmarks/bench_kernels.py [--grid 257 2049] [--repeat 200]
"""

import argparse
import time

import numpy as np

from ruelle import kernels
from ruelle.potentials import geometric
from ruelle.systems import gauss, golden_cantor, perturbed_doubling
from ruelle.transfer import operator_plan


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times), float(np.median(times))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grid", type=int, nargs="+", default=[257, 2049])
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args()

    cases = [("golden_cantor", golden_cantor()), ("perturbed_doubling", perturbed_doubling(0.05)),
             ("gauss", gauss())]
    backends = kernels.available_backends()
    print(f"backends: {', '.join(backends)}")
    print(f"{'system':<20}{'grid':>6}{'branches':>9}{'backend':>10}{'workers':>9}{'best ms':>10}{'median ms':>11}{'speedup':>9}")
    for (name, sys), grid in ((c, g) for g in args.grid for c in cases):
        plan = operator_plan(sys, geometric(1.0), grid)
        v = np.linspace(1.0, 2.0, grid)
        ref = None
        base = None
        for backend in backends:
            for workers in (1, 4):
                with kernels.using(backend, workers):
                    out = plan.apply_values(v)
                    best, med = best_of(lambda: plan.apply_values(v), args.repeat)
                if ref is None:
                    ref = out
                assert np.array_equal(out, ref), "backends disagree"
                if base is None:
                    base = best
                print(f"{name:<20}{grid:>6}{plan.weights.shape[1]:>9}{backend:>10}{workers:>9}"
                      f"{best * 1e3:>10.3f}{med * 1e3:>11.3f}{base / best:>9.2f}")


if __name__ == "__main__":
    main()
