#!/usr/bin/env python3
"""Benchmark the compiled QP kernel against the pure-Python fallback.

Builds decomposition-style non-negative QPs (Bateman deconvolution plus a
spline tonic) at several tile lengths and times solve_nonneg_qp with each
backend, plus the raw coordinate-descent kernels on identical inputs.

Usage: python3 benchmarks/bench_qp.py [--sizes 60,120,240] [--repeats 3]
"""

import argparse
import time

import numpy as np

from edaflow import _qp_numpy
from edaflow.decompose import DecompParams, build_problem
from edaflow.qp import HAVE_COMPILED, solve_nonneg_qp
from edaflow.synth import SynthParams, synth_trace

try:
    from edaflow import _qp_core
except ImportError:
    _qp_core = None


def make_problem(duration_s: float, seed: int = 0):
    params = DecompParams()
    truth = synth_trace(SynthParams(seed=seed, duration_s=max(duration_s, 240.0)))
    fs = truth.trace.fs
    y = truth.trace.samples[: int(duration_s * fs)]
    H, f, mask = build_problem(y, fs, params)[2:]
    return H, f, mask


def time_solve(H, f, mask, backend, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        solve_nonneg_qp(H, f, mask, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best


def time_kernel(kernel, H, f, mask, repeats, sweeps=200):
    best = np.inf
    for _ in range(repeats):
        x = np.zeros(len(f))
        t0 = time.perf_counter()
        kernel.cd_sweeps(H, f, mask, x, 1e-8, sweeps)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="60,120,240",
                    help="comma-separated tile durations in seconds")
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()
    sizes = [float(s) for s in args.sizes.split(",")]

    if not HAVE_COMPILED:
        print("compiled extension not available; showing python backend only")

    header = f"{'tile':>8} {'n_vars':>7} {'python':>12} {'compiled':>12} {'speedup':>8}"
    print("full solve (solve_nonneg_qp, seconds, best of %d)" % args.repeats)
    print(header)
    for dur in sizes:
        H, f, mask = make_problem(dur)
        t_py = time_solve(H, f, mask, "python", args.repeats)
        if HAVE_COMPILED:
            t_c = time_solve(H, f, mask, "compiled", args.repeats)
            print(f"{dur:7.0f}s {len(f):7d} {t_py:12.4f} {t_c:12.4f} {t_py / t_c:7.1f}x")
        else:
            print(f"{dur:7.0f}s {len(f):7d} {t_py:12.4f} {'-':>12} {'-':>8}")

    print()
    print("coordinate-descent kernel only (200 sweeps, seconds)")
    print(header)
    for dur in sizes:
        H, f, mask = make_problem(dur)
        t_py = time_kernel(_qp_numpy, H, f, mask, args.repeats)
        if _qp_core is not None:
            t_c = time_kernel(_qp_core, H, f, mask, args.repeats)
            print(f"{dur:7.0f}s {len(f):7d} {t_py:12.4f} {t_c:12.4f} {t_py / t_c:7.1f}x")
        else:
            print(f"{dur:7.0f}s {len(f):7d} {t_py:12.4f} {'-':>12} {'-':>8}")


if __name__ == "__main__":
    main()
