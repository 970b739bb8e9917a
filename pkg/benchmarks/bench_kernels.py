#!/usr/bin/env python3
"""Benchmark the compiled convolution kernels against the numpy fallback.

Shapes mirror the regressor's real workloads: the strided stem over a pooled
299-mel spectrogram and the three branch convolutions. Run from the repo
root:

    python3 benchmarks/bench_kernels.py
"""
import time

import numpy as np

from majorness.kernels import BACKEND, fallback

try:
    from majorness.kernels import _convops as compiled
except ImportError:
    compiled = None

# (label, c_in, h, w, c_out, k, stride, pad)
CASES = [
    ("stem 299x53 k3 s(2,1)", 1, 299, 53, 4, 3, (2, 1), (1, 1)),
    ("branch1 150x53", 4, 150, 53, 8, 1, (1, 1), (0, 0)),
    ("branch3 150x53", 4, 150, 53, 8, 3, (1, 1), (1, 1)),
    ("branch5 150x53", 4, 150, 53, 8, 5, (1, 1), (2, 2)),
    ("wide branch5 150x81", 16, 150, 81, 96, 5, (1, 1), (2, 2)),
]


def time_call(fn, *args, repeats=5):
    fn(*args)  # warmup
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    rng = np.random.default_rng(0)
    print(f"selected backend at import: {BACKEND}")
    header = f"{'case':26s} {'dir':4s} {'numpy ms':>9s} {'cython ms':>10s} {'speedup':>8s}"
    print(header)
    print("-" * len(header))
    for label, c_in, h, w, c_out, k, stride, pad in CASES:
        x = rng.normal(size=(c_in, h, w))
        wt = rng.normal(size=(c_out, c_in, k, k))
        b = rng.normal(size=c_out)
        y = fallback.conv2d_forward(x, wt, b, *stride, *pad)
        gy = rng.normal(size=y.shape)

        rows = [("fwd", (x, wt, b, *stride, *pad), "conv2d_forward"),
                ("bwd", (x, wt, gy, *stride, *pad), "conv2d_backward")]
        for direction, args, fn_name in rows:
            t_np = time_call(getattr(fallback, fn_name), *args)
            if compiled is not None:
                t_cy = time_call(getattr(compiled, fn_name), *args)
                ratio = t_np / t_cy
                print(f"{label:26s} {direction:4s} {t_np*1e3:9.2f} {t_cy*1e3:10.2f} {ratio:7.2f}x")
            else:
                print(f"{label:26s} {direction:4s} {t_np*1e3:9.2f} {'n/a':>10s} {'':>8s}")


if __name__ == "__main__":
    main()
