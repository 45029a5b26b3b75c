"""Times each kernel's compiled and plain-numpy implementation on realistic inputs.

    python benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np
from scipy import signal as sps

from ppgtune import _kernels as k


def _inputs(seed=0):
    rng = np.random.default_rng(seed)
    sos = sps.cheby2(4, 40.0, [0.5, 4.0], btype="bandpass", fs=64.0, output="sos")
    x = rng.normal(size=64 * 600)
    zi = np.zeros((sos.shape[0], 2))
    ecg = np.cumsum(rng.normal(800, 40, 750)).astype(np.int64)
    ppg = np.sort(ecg + rng.integers(-60, 60, ecg.size))
    lags = np.arange(-2000, 2001, 20, dtype=np.int64)
    front = rng.normal(size=(80, 3))
    idx = np.sort(rng.choice(64 * 600, size=3000, replace=False)).astype(np.int64)
    heights = rng.random(idx.size)
    return {
        "sosfilt (10 min @ 64 Hz)": ("sosfilt", (sos, x, zi)),
        "match_pairs (750 beats)": ("match_pairs", (ppg, ecg, 150.0)),
        "lag_scan (201 lags)": ("lag_scan", (ppg, ecg, lags, 150.0)),
        "front_rank (80 triples)": ("front_rank", (front,)),
        "select_peaks (3000 candidates)": ("select_peaks", (idx, heights, 16)),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    print(f"{'kernel':32s} {'numba ms':>10s} {'numpy ms':>10s} {'speed-up':>9s}")
    for label, (name, inputs) in _inputs().items():
        nb = getattr(k, name + "_nb")
        npf = getattr(k, name + "_np")
        nb(*inputs)  # compile outside the timing
        t_nb = min(timeit.repeat(lambda: nb(*inputs), number=1, repeat=args.repeat)) * 1e3
        t_np = min(timeit.repeat(lambda: npf(*inputs), number=1, repeat=args.repeat)) * 1e3
        print(f"{label:32s} {t_nb:10.3f} {t_np:10.3f} {t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()
