"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Also times one end-to-end training epoch, which is dominated by BLAS and
runs the same code under either backend.
"""
import argparse
import timeit

import numpy as np

from sgrbm._kernels import BACKENDS
from sgrbm.regularizer import Grouping


def cases(rng):
    A = rng.normal(0, 0.3, (18, 30))
    a, d = rng.normal(size=18), rng.normal(size=30)
    P = rng.random((100, 600))
    g = Grouping.uniform(600, 3)
    X = rng.random((10_000, 64)) * (rng.random((10_000, 64)) < 0.3)
    return {
        "enum_log_sum (2^18 states x 30)": lambda k: k.enum_log_sum(A, a, d),
        "group_coefficients (100 x 600, g=3)": lambda k: k.group_coefficients(P, g._order, g._offsets, 1e-8),
        "hoyer_rows (10000 x 64)": lambda k: k.hoyer_rows(X),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    names = [n for n in ("python", "compiled") if n in BACKENDS]
    if "compiled" not in BACKENDS:
        print("compiled extension not built; timing the fallback only")
    print(f"{'kernel':40s}" + "".join(f"{n:>12s}" for n in names) + ("     speedup" if len(names) == 2 else ""))
    for label, fn in cases(rng).items():
        times = []
        for n in names:
            k = BACKENDS[n]
            fn(k)
            times.append(min(timeit.repeat(lambda: fn(k), number=1, repeat=args.repeat)))
        row = f"{label:40s}" + "".join(f"{t * 1e3:10.2f}ms" for t in times)
        if len(times) == 2:
            row += f"{times[0] / times[1]:11.1f}x"
        print(row)

    from sgrbm.rbm import TrainConfig, init_params
    from sgrbm.regularizer import RegularizerConfig
    from sgrbm.training import train_rbm

    data = (rng.random((2000, 784)) < 0.15).astype(float)
    p = init_params(784, 64, np.random.default_rng(1), data=data)
    t = min(timeit.repeat(
        lambda: train_rbm(p, data, TrainConfig(epochs=1), RegularizerConfig(lam=0.1, group_size=4),
                          Grouping.uniform(64, 4), np.random.default_rng(2)),
        number=1, repeat=args.repeat))
    print(f"{'one epoch, 2000 x 784 -> 64 (BLAS-bound)':40s}{t * 1e3:10.2f}ms")


if __name__ == "__main__":
    main()
