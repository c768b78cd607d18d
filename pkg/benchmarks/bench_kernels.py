"""Compare the compiled and pure-numpy estimator kernels.

Usage: python3 benchmarks/bench_kernels.py [--sizes 10000,100000,1000000] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from nsfest import kernels
from nsfest.core import ProblemConfig
from nsfest.estimators import block_schedule, dense_coefficients


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="10000,100000,1000000")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if kernels.compiled_backend is None:
        raise SystemExit("compiled kernels are not built; run pip install -e . first")

    cfg = ProblemConfig(d=4096, s=4096, eps=1.0, gamma=1.5, c=0.01)
    sched = block_schedule(cfg)
    coef = dense_coefficients(cfg)
    rng = np.random.default_rng(0)
    print(f"dense blocks={sched.L + 1} K={sched.K}")
    print(f"{'kernel':8s} {'n':>9s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for n in (int(x) for x in args.sizes.split(",")):
        u = rng.normal(scale=3.0, size=n)
        v = rng.normal(scale=3.0, size=n)
        cases = {
            "dense": lambda b: b.dense_terms(u, v, sched.sigma, sched.cuts, coef, cfg.gamma),
            "sparse": lambda b: b.sparse_terms(u, 1.0, cfg.gamma, 2.0, 4.0),
        }
        for name, fn in cases.items():
            a = fn(kernels.python_backend)
            b = fn(kernels.compiled_backend)
            assert np.allclose(a, b, rtol=1e-12, atol=1e-12), name
            tp = min(timeit.repeat(lambda: fn(kernels.python_backend), number=1, repeat=args.repeat))
            tc = min(timeit.repeat(lambda: fn(kernels.compiled_backend), number=1, repeat=args.repeat))
            print(f"{name:8s} {n:9d} {1e3 * tp:10.2f} {1e3 * tc:10.2f} {tp / tc:8.1f}")


if __name__ == "__main__":
    main()
