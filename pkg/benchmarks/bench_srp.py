#!/usr/bin/env python3
"""Compare the compiled and numpy kernels on realistic workloads.

Runs the steering scan and the fractional-delay mixer on the same inputs with
both backends, reports wall-clock times and checks the outputs agree.  The
mixer must match bit for bit (same arithmetic expression); the steering scan
is allowed a tiny float tolerance because the summation order differs.

Usage: python benchmarks/bench_srp.py [--repeats N]
"""

import argparse
import time

import numpy as np

from earshot import _kernels_np

try:
    from earshot import _kernels
except ImportError:
    _kernels = None


def _time(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_steered_power(repeats):
    rng = np.random.default_rng(0)
    n_pairs, n_bins_f, n_az = 28, 62, 30  # 8 mics, 50-1500 Hz band, B=30
    g = rng.standard_normal((n_pairs, n_bins_f)) + 1j * rng.standard_normal((n_pairs, n_bins_f))
    g_re = np.ascontiguousarray(g.real)
    g_im = np.ascontiguousarray(g.imag)
    tau = rng.uniform(-2e-3, 2e-3, (n_az, n_pairs))
    omega = 2 * np.pi * np.linspace(50, 1500, n_bins_f)

    results = {}
    timings = {}
    backends = {"numpy": _kernels_np}
    if _kernels is not None:
        backends["cython"] = _kernels
    for name, mod in backends.items():
        fn = lambda: mod.steered_power(g_re, g_im, tau, omega)
        results[name] = fn()
        timings[name] = _time(fn, repeats)
    return "steered_power (28 pairs x 62 bins x 30 azimuths)", timings, results, 1e-9


def bench_lerp_mix(repeats):
    rng = np.random.default_rng(1)
    n = 48000 * 5
    lead = 4000
    sig = rng.standard_normal(lead + n + 2)
    delay = rng.uniform(100.0, 3000.0, n)
    amp = rng.uniform(0.1, 1.0, n)
    amp[::7] = 0.0  # mixed valid/invalid stretches

    results = {}
    timings = {}
    backends = {"numpy": _kernels_np}
    if _kernels is not None:
        backends["cython"] = _kernels
    for name, mod in backends.items():
        def fn():
            out = np.zeros(n)
            mod.lerp_mix(out, sig, delay, amp, lead)
            return out
        results[name] = fn()
        timings[name] = _time(fn, repeats)
    return "lerp_mix (5 s at 48 kHz, one path)", timings, results, 0.0


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    if _kernels is None:
        print("compiled extension not built; timing the numpy fallback only")

    for bench in (bench_steered_power, bench_lerp_mix):
        label, timings, results, tol = bench(args.repeats)
        print(f"\n{label}")
        for name, t in sorted(timings.items()):
            print(f"  {name:7s} {t * 1e3:8.3f} ms")
        if len(results) == 2:
            diff = np.max(np.abs(results["cython"] - results["numpy"]))
            scale = np.max(np.abs(results["numpy"])) or 1.0
            verdict = "OK" if diff <= tol * scale + tol else "MISMATCH"
            exact = " (bit-exact)" if diff == 0.0 else ""
            print(f"  agreement: max |diff| = {diff:.3e} {verdict}{exact}")
            speedup = timings["numpy"] / timings["cython"]
            print(f"  speedup: {speedup:.1f}x")


if __name__ == "__main__":
    main()
