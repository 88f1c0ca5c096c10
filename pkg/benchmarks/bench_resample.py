"""Benchmark the band-limited resampling kernel: numba versus pure numpy.

Usage:
    python benchmarks/bench_resample.py [--n 2048] [--targets 2048] [--frames 64]

The numba path is also what HEATLAB_NUMBA=0 disables package-wide; this script
times both paths on identical inputs and checks they agree.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from heatlab import kernels


def make_frame(n: int, half_width: float) -> np.ndarray:
    x = -half_width + 2.0 * half_width * np.arange(n) / n
    return np.exp(-(x**2) / 4.0) * (1.0 + 0.3 * np.sin(2.0 * x)) + 0.5j * np.exp(-(x**2) / 3.0)


def run(n: int, n_targets: int, frames: int, half_width: float = 16.0) -> None:
    frame = make_frame(n, half_width)
    rng = np.random.default_rng(7)
    targets = rng.uniform(-half_width, half_width, size=n_targets)

    results = {}
    for backend in ("numba", "numpy"):
        if backend == "numba" and not kernels.NUMBA_AVAILABLE:
            print("numba not importable; skipping the jit path")
            continue
        kernels.set_backend(backend)
        # warm up (jit compilation on the numba path)
        out = kernels.resample_periodic(frame, targets, half_width)
        start = time.perf_counter()
        for _ in range(frames):
            out = kernels.resample_periodic(frame, targets, half_width)
        elapsed = time.perf_counter() - start
        results[backend] = (elapsed, out)
        print(
            f"{backend:>6}: {elapsed:.3f} s for {frames} frames "
            f"({frames * n * n_targets / elapsed / 1e6:.0f} M mode-evals/s)"
        )

    if len(results) == 2:
        gap = np.max(np.abs(results["numba"][1] - results["numpy"][1]))
        speedup = results["numpy"][0] / results["numba"][0]
        print(f"paths agree to {gap:.2e}; numba speedup {speedup:.1f}x")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=2048)
    ap.add_argument("--targets", type=int, default=2048)
    ap.add_argument("--frames", type=int, default=64)
    args = ap.parse_args()
    run(args.n, args.targets, args.frames)
