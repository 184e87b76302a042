"""Time the numba kernels against their pure-numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 20]

Both variants are imported directly, so the backend env flag does not matter
here. The first numba call (compilation or cache load) is excluded.
"""
import argparse
import timeit

import numpy as np

from cthrv import kernels
from cthrv._backend import HAVE_NUMBA
from cthrv.simulate import benchmark_lead_spec, generate_lead_profile


def cases():
    lead = generate_lead_profile(benchmark_lead_spec())
    rng = np.random.default_rng(0)
    n = 500
    states = np.column_stack([rng.normal(62.5, 0.5, n), rng.normal(24.4, 0.5, n),
                              rng.normal(0.1, 0.2, n), rng.normal(0.1, 0.2, n), rng.normal(1.4, 0.3, n)])
    noise = rng.standard_normal(states.shape) * 0.01
    w = rng.random(n)
    w /= w.sum()
    return {
        "euler objective (6200 steps)": (
            lambda f: f(0.08, 0.12, 1.5, lead, 24.4, 62.5, 0.1),
            kernels.euler_follower_nb, kernels.euler_follower_np),
        "pf predict (500 particles)": (
            lambda f: f(states, noise, 24.4, 0.1, 1e-6),
            kernels.pf_predict_nb, kernels.pf_predict_np),
        "pf likelihood (500 particles)": (
            lambda f: f(states, 62.4, 24.3, 0.2, 0.1),
            kernels.pf_likelihood_nb, kernels.pf_likelihood_np),
        "systematic resample (500)": (
            lambda f: f(w, 0.0007),
            kernels.systematic_nb, kernels.systematic_np),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    if not HAVE_NUMBA:
        print("numba not importable; only the numpy path exists")
    print(f"{'kernel':32s} {'numba [us]':>12s} {'numpy [us]':>12s} {'speedup':>8s}")
    for name, (call, nb, np_) in cases().items():
        call(nb)
        t_nb = min(timeit.repeat(lambda: call(nb), number=10, repeat=args.repeat)) / 10
        t_np = min(timeit.repeat(lambda: call(np_), number=10, repeat=args.repeat)) / 10
        print(f"{name:32s} {t_nb * 1e6:12.1f} {t_np * 1e6:12.1f} {t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()
