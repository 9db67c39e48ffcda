"""Times the compiled and numpy Poisson-binomial kernels on the same profiles.

Run with ``python3 benchmarks/bench_kernels.py``. Reports the median wall
time per call for each backend and checks that the outputs agree.
"""
import argparse
import timeit

import numpy as np

from dpbounds import _pykernels

try:
    from dpbounds import _speedups
except ImportError:
    _speedups = None


def bench(fn, args, repeat: int) -> float:
    timer = timeit.Timer(lambda: fn(*args))
    number, _ = timer.autorange()
    return min(timer.repeat(repeat, number)) / number


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="10,100,1000,5000")
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if _speedups is None:
        print("compiled extension not built; only the numpy backend is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<18}{'n':>7}{'numpy (s)':>14}{'cython (s)':>14}{'speedup':>10}")
    for n in (int(x) for x in args.sizes.split(",")):
        betas = rng.random(n)
        pmf = _pykernels.poibin_pmf(betas)
        surv = _pykernels.survival_from_pmf(pmf)
        cases = [
            ("poibin_pmf", (betas,)),
            ("survival_from_pmf", (pmf,)),
            ("lp_alpha", (surv, n // 2)),
            ("inflated_quantile", (surv, n * 1e-5, 0.05)),
        ]
        for name, call_args in cases:
            py = bench(getattr(_pykernels, name), call_args, args.repeat)
            if _speedups is None:
                print(f"{name:<18}{n:>7}{py:>14.3e}{'-':>14}{'-':>10}")
                continue
            cy_fn = getattr(_speedups, name)
            a, b = np.asarray(getattr(_pykernels, name)(*call_args)), np.asarray(cy_fn(*call_args))
            if not np.array_equal(a, b):
                raise SystemExit(f"{name} backends disagree at n = {n}")
            cy = bench(cy_fn, call_args, args.repeat)
            print(f"{name:<18}{n:>7}{py:>14.3e}{cy:>14.3e}{py / cy:>10.1f}")


if __name__ == "__main__":
    main()
