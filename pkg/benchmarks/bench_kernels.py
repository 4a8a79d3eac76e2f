"""Benchmark the numba-compiled kernels against their pure-numpy bodies.

Usage: python benchmarks/bench_kernels.py [--repeat N]

With numba available each kernel is timed through its compiled
dispatcher and again through the uncompiled Python body (``py_func``).
Set QUANTGYM_NUMBA=0 to check the import-time fallback path end to end.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from quantgym import kernels
from quantgym.accel import NUMBA_ENABLED, python_impl


def time_call(fn, *args, repeat: int = 5) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--size", type=int, default=200_000)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    T = args.size
    close = 100.0 * np.exp(np.cumsum(rng.normal(0, 0.01, T)))
    high = close * (1 + np.abs(rng.normal(0, 0.003, T)))
    low = close * (1 - np.abs(rng.normal(0, 0.003, T)))
    returns = rng.normal(0, 0.01, (5_000, 8))
    prices = rng.uniform(10, 500, 64)
    holdings = np.floor(rng.uniform(0, 50, 64))
    deltas = np.floor(rng.uniform(-30, 30, 64))

    cases = [
        ("sma", kernels.sma_kernel, (close, 20)),
        ("ema", kernels.ema_kernel, (close, 20)),
        ("rsi", kernels.rsi_kernel, (close, 14)),
        ("cci", kernels.cci_kernel, (high, low, close, 20)),
        ("adx", kernels.adx_kernel, (high, low, close, 14)),
        ("turbulence", kernels.turbulence_kernel, (returns, 252, 1e-8, 1.0)),
        ("execute_trades", kernels.execute_trades_kernel,
         (prices, holdings, 1e5, deltas, 0.001, False, False)),
    ]

    print(f"numba enabled: {NUMBA_ENABLED}")
    header = f"{'kernel':<16}{'compiled (s)':>14}{'python (s)':>14}{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name, fn, call_args in cases:
        fn(*call_args)  # warm the JIT cache
        compiled = time_call(fn, *call_args, repeat=args.repeat)
        py = python_impl(fn)
        scale = 1
        if not NUMBA_ENABLED:
            compiled_label = compiled
            py_time = compiled
        else:
            # the python body can be slow; time one call on a reduced input
            if name in ("cci", "turbulence"):
                scale = 10
            small_args = tuple(
                a[: max(1, len(a) // scale)] if isinstance(a, np.ndarray)
                and a.ndim >= 1 and a.shape[0] > 1000 else a
                for a in call_args)
            py_time = time_call(py, *small_args, repeat=1) * scale
            compiled_label = compiled
        speedup = py_time / compiled_label if compiled_label > 0 else float("nan")
        print(f"{name:<16}{compiled_label:>14.6f}{py_time:>14.6f}{speedup:>10.1f}")


if __name__ == "__main__":
    main()
