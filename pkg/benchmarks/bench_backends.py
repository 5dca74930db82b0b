"""Compare the numba and numpy kernel backends.

Times the single-cohort pipeline and the bootstrap loop on generated
cohorts after a warmup pass, so numba's one-time compilation cost is
excluded from the per-call numbers (it is reported separately).

Usage:
    python benchmarks/bench_backends.py [--n 1000] [--replicates 500] [--repeats 5]
"""
import argparse
import time

import numpy as np

from evtv._kernels import NUMBA_BACKEND, NUMPY_BACKEND
from evtv.estimation import cohort_arrays
from evtv.simulation import SimulationParams, generate_cohort


def time_call(fn, *args, repeats: int):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=1000, help="cohort size")
    parser.add_argument("--replicates", type=int, default=500, help="bootstrap replicates")
    parser.add_argument("--repeats", type=int, default=5, help="timing repeats (best kept)")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    cohort = generate_cohort(SimulationParams(n=args.n), args.seed)
    arrays = cohort_arrays(cohort.records)
    rng = np.random.default_rng(args.seed)
    idx = rng.integers(0, args.n, size=(args.replicates, args.n))

    backends = [NUMPY_BACKEND]
    if NUMBA_BACKEND is not None:
        backends.append(NUMBA_BACKEND)
    else:
        print("numba not installed; timing the numpy backend only")

    print(f"cohort n={args.n}, bootstrap replicates={args.replicates}, best of {args.repeats}")
    header = f"{'backend':<8} {'compile+first':>14} {'pipeline':>12} {'bootstrap':>12}"
    print(header)
    print("-" * len(header))
    results = {}
    for backend in backends:
        t0 = time.perf_counter()
        backend.rr_pipeline(*arrays)
        backend.bootstrap_rrs(*arrays, idx[:2])
        first = time.perf_counter() - t0
        pipe = time_call(backend.rr_pipeline, *arrays, repeats=args.repeats)
        boot = time_call(backend.bootstrap_rrs, *arrays, idx, repeats=args.repeats)
        results[backend.name] = (pipe, boot)
        print(f"{backend.name:<8} {first:>13.3f}s {pipe * 1e3:>10.2f}ms {boot:>11.3f}s")

    if len(results) == 2:
        pipe_ratio = results["numpy"][0] / results["numba"][0]
        boot_ratio = results["numpy"][1] / results["numba"][1]
        print(f"\nnumba speedup: pipeline {pipe_ratio:.1f}x, bootstrap {boot_ratio:.1f}x")


if __name__ == "__main__":
    main()
