"""Compare the numba kernels with the numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5] [--end-to-end]

The kernel timings call both implementations in one process.  With
``--end-to-end`` a GES run on a d=20 synthetic dataset is also timed in two
subprocesses, one with ``KGS_DISABLE_NUMBA=1``.
"""
from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from kgs import _kernels as k

E2E = """
import time
import numpy as np
from kgs import _kernels
from kgs.search import run_ges
from kgs.synth import SemConfig, simulate
_, data = simulate(SemConfig(d=20, n=1000, seed=1))
_kernels.residual_variance(np.eye(2), 0, np.array([1], dtype=np.int64))  # load the compiled kernel
t0 = time.perf_counter()
run_ges(data)
print(time.perf_counter() - t0)
"""


def _regression_workload(d=30, calls=20_000, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(500, d)) @ rng.normal(size=(d, d))
    X -= X.mean(axis=0)
    cov = np.ascontiguousarray(X.T @ X / 500)
    jobs = []
    for _ in range(calls):
        node = int(rng.integers(d))
        others = np.delete(np.arange(d), node)
        pa = np.sort(rng.choice(others, size=int(rng.integers(0, 6)), replace=False)).astype(np.int64)
        jobs.append((node, pa))
    return cov, jobs


def bench_regressions(repeat):
    cov, jobs = _regression_workload()
    fns = {"numpy": k.residual_variance_numpy}
    if k.HAVE_NUMBA:
        k.residual_variance_numba(cov, 0, np.array([1], dtype=np.int64))  # compile
        fns["numba"] = k.residual_variance_numba
    out = {}
    for name, fn in fns.items():
        t = min(timeit.repeat(lambda: [fn(cov, n, p) for n, p in jobs], number=1, repeat=repeat))
        out[name] = t
        print(f"residual_variance  {name:6s} {len(jobs)} calls  {t * 1e3:9.1f} ms")
    return out


def bench_counting(repeat):
    out = {}
    for d in (4, 5):
        codes = np.zeros((d, d), dtype=np.int64)
        codes[0, 1], codes[1, 0] = 1, 2
        fns = {"numpy": k.count_dags_numpy}
        if k.HAVE_NUMBA:
            k.count_dags_numba(3, np.zeros((3, 3), dtype=np.int64))
            fns["numba"] = k.count_dags_numba
        counts = {name: fn(d, codes) for name, fn in fns.items()}
        assert len(set(counts.values())) == 1, counts
        for name, fn in fns.items():
            t = min(timeit.repeat(lambda: fn(d, codes), number=1, repeat=repeat))
            out[(d, name)] = t
            print(f"count_dags d={d}    {name:6s} {counts[name]:>6} DAGs  {t * 1e3:9.1f} ms")
    return out


def bench_end_to_end():
    for label, env in (("numba", {}), ("numpy", {"KGS_DISABLE_NUMBA": "1"})):
        res = subprocess.run([sys.executable, "-c", E2E], env={**os.environ, **env},
                             capture_output=True, text=True, check=True)
        print(f"GES d=20 end-to-end {label:6s} {float(res.stdout) * 1e3:9.1f} ms")


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--end-to-end", action="store_true")
    args = p.parse_args(argv)
    print(f"numba available: {k.HAVE_NUMBA}; active backend: {k.BACKEND}")
    bench_regressions(args.repeat)
    bench_counting(args.repeat)
    if args.end_to_end:
        bench_end_to_end()


if __name__ == "__main__":
    main()
