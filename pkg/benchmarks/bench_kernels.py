"""Compare the numba and numpy adaptation kernels on one Monte Carlo trial.

    python3 benchmarks/bench_kernels.py [--samples 100000] [--repeat 3]
"""

import argparse
import time

import numpy as np

from fonspn._accel import HAVE_NUMBA
from fonspn.adaptive import adapt_signal
from fonspn.harness import _signals
from fonspn.scenarios import cauchy_input, gaussian_identification, impulsive_noise


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    cases = {
        "NSAF gaussian": gaussian_identification(mu=0.5, total_samples=args.samples),
        "FoNSPN impulsive": impulsive_noise("FoNSPN", 0.65, total_samples=args.samples),
        "FoNSPN cauchy": cauchy_input("FoNSPN", 0.65, total_samples=args.samples),
    }
    backends = ["numpy"] + (["numba"] if HAVE_NUMBA else [])
    print(f"{'case':<18} {'backend':<7} {'seconds':>9} {'updates/s':>12}")
    for name, cfg in cases.items():
        h0 = cfg.system()
        x, d = _signals(cfg, 0, h0)
        bank = cfg.bank()
        results = {}
        for backend in backends:
            if backend == "numba":
                adapt_signal(bank, x[:4000], d[:4000], cfg.algo, h0, backend="numba")  # compile
            secs, res = best_of(lambda: adapt_signal(bank, x, d, cfg.algo, h0, backend=backend), args.repeat)
            results[backend] = (secs, res)
            print(f"{name:<18} {backend:<7} {secs:9.4f} {res.nmsd.size / secs:12.0f}")
        if len(results) == 2:
            (tn, rn), (tb, rb) = results["numpy"], results["numba"]
            diff = np.nanmax(np.abs(rn.nmsd - rb.nmsd) / rn.nmsd)
            print(f"{'':<18} speedup {tn / tb:8.1f}x   max relative NMSD difference {diff:.1e}")


if __name__ == "__main__":
    main()
