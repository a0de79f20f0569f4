"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 3]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from margin_lab import _accel, kernels
from margin_lab.model import ModelSpec, sample_dataset


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    if not _accel.HAVE_NUMBA:
        print("numba unavailable or disabled; only the numpy path can be timed")

    ds = sample_dataset(ModelSpec(n=40, p=400, mu_norm=3.0, eta=0.1), seed=1)
    Q = ds.folded_X @ ds.folded_X.T
    gd_data = sample_dataset(ModelSpec(n=10, p=50, mu_norm=2.0, eta=0.1), seed=1)
    Xt = np.ascontiguousarray(gd_data.folded_X)
    step = 4.0 / (np.linalg.eigvalsh(Xt @ Xt.T)[-1] / Xt.shape[0])
    ref = np.zeros(Xt.shape[1])

    cases = {
        "dual coordinate ascent (n=40)": (
            lambda: kernels.dual_cd_numpy(Q, np.zeros(40), 1e-10, 100_000, 10),
            lambda: kernels.dual_cd_numba(Q, np.zeros(40), 1e-10, 100_000, 10),
        ),
        "logistic GD (n=10, p=50, 20k iters)": (
            lambda: kernels.logistic_gd_numpy(Xt, step, 20_000, 1000, ref, np.inf, 10),
            lambda: kernels.logistic_gd_numba(Xt, step, 20_000, 1000, ref, np.inf, 10),
        ),
    }
    print(f"{'kernel':<40} {'numpy [s]':>10} {'numba [s]':>10} {'speedup':>8}")
    for name, (np_fn, nb_fn) in cases.items():
        t_np = best_of(np_fn, args.repeat)
        if _accel.HAVE_NUMBA:
            nb_fn()  # compile outside the timing
            t_nb = best_of(nb_fn, args.repeat)
            print(f"{name:<40} {t_np:>10.4f} {t_nb:>10.4f} {t_np / t_nb:>7.1f}x")
        else:
            print(f"{name:<40} {t_np:>10.4f} {'-':>10} {'-':>8}")


if __name__ == "__main__":
    main()
