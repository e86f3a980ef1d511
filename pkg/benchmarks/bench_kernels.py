"""Time the CTL and CTC lattices under each available backend.

    python3 benchmarks/bench_kernels.py [--repeat N]

Prints one CSV row per (kernel, size, backend) with the median wall time of
a forward plus backward pass and the speedup over the pure-Python backend.
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from ctlsed import kernels
from ctlsed.ctc import ctc_loss_and_grad
from ctlsed.ctl import CtlConfig, ctl_loss_and_grad
from ctlsed.gradcheck import random_ctc_grid
from ctlsed.labels import strong_to_sequential

SIZES = [(100, 2, 4), (400, 2, 12), (1000, 4, 40)]  # frames, classes, events


def make_case(rng, T, n, events):
    mask = np.zeros((T, n), dtype=np.uint8)
    for _ in range(events):
        c, start = int(rng.integers(n)), int(rng.integers(T - 10))
        mask[start : start + int(rng.integers(3, 10)), c] = 1
    L = strong_to_sequential(mask)
    y = np.clip(0.8 * mask + rng.uniform(0.05, 0.2, (T, n)), 0, 1)
    q = random_ctc_grid(rng, T, 2 * n + 1)
    return y, q, L


def timed(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    rng = np.random.default_rng(0)
    print("kernel,frames,classes,labels,backend,median_seconds,speedup")
    for T, n, events in SIZES:
        y, q, L = make_case(rng, T, n, events)
        cases = {
            "ctl": lambda: ctl_loss_and_grad(y, L, CtlConfig(2)),
            "ctc": lambda: ctc_loss_and_grad(q, L),
        }
        for name, fn in cases.items():
            base = None
            for backend in ("python", *[b for b in kernels.available_backends() if b != "python"]):
                with kernels.backend(backend):
                    sec = timed(fn, args.repeat)
                base = sec if base is None else base
                print(f"{name},{T},{n},{len(L)},{backend},{sec:.6f},{base / sec:.1f}")


if __name__ == "__main__":
    main()
