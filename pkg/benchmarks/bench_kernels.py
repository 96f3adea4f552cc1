"""Time the numba and numpy forms of each hot kernel on identical inputs.

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from qudit_tomo import kernels
from qudit_tomo.measurement import builtin_set, simulate_counts
from qudit_tomo.states import random_physical_state


def cases():
    rng = np.random.default_rng(0)
    ms = builtin_set("product:qutrit-paper9xqutrit-paper9")
    rho = np.ascontiguousarray(random_physical_state(3, 2, 1).matrix)
    yield "born_probabilities 81x9x9", "born_probabilities", (rho, ms.operators), 200

    means = rng.choice([3.0, 12.0, 400.0], size=(200, 81))
    yield "poisson_counts 200x81", "poisson_counts", (means, rng.random(means.shape), rng.standard_normal(means.shape)), 20

    for ident, d, n, shots in [("qubit-hvdl", 2, 1, 200.0), ("product:qutrit-paper9xqutrit-paper9", 3, 2, 1e4)]:
        ms = builtin_set(ident)
        rec = simulate_counts(random_physical_state(d, n, 2, "pure"), ms, shots, 2)
        dim = d**n
        g_inv = np.linalg.inv(ms.operators.sum(axis=0))
        args = (ms.operators, rec.counts, np.eye(dim, dtype=complex) / dim, g_inv, 1.0, 1e4, 1e-12, 1e-10, 500)
        yield f"rrr {ident}", "rrr", args, 3


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    table = kernels.backends()
    print(f"{'case':42s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}")
    for label, name, inputs, number in cases():
        impls = table[name]
        # warm up (numba compiles or loads its cache on first call)
        for fn in impls.values():
            fn(*inputs)
        best = {}
        for key, fn in impls.items():
            t = min(timeit.repeat(lambda: fn(*inputs), number=number, repeat=args.repeat))
            best[key] = 1e3 * t / number
        nb = best.get("numba", float("nan"))
        print(f"{label:42s} {best['numpy']:10.3f} {nb:10.3f} {best['numpy'] / nb:8.1f}x")


if __name__ == "__main__":
    main()
