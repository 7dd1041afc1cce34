"""Compare the compiled statevector kernels against the numpy fallback.

Run:  python benchmarks/bench_kernels.py [--qubits 16] [--repeats 5]
"""

from __future__ import annotations

import argparse
import importlib
import time

import numpy as np


def load_backends():
    backends = {}
    from cvarq import _kernels_py

    backends["python"] = _kernels_py
    try:
        _kernels_cy = importlib.import_module("cvarq._kernels_cy")
        backends["cython"] = _kernels_cy
    except ImportError:
        print("cython kernels unavailable; benchmarking fallback only")
    return backends


def bench(mod, n: int, repeats: int) -> dict:
    rng = np.random.default_rng(7)
    dim = 1 << n
    base = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    base /= np.linalg.norm(base)
    h = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
    controls = np.arange(0, n - 1, 2, dtype=np.int64)
    targets = controls + 1
    x_mask = int(rng.integers(0, dim))
    z_mask = int(rng.integers(0, dim))

    out = {}
    for name, fn in (
        ("apply_1q", lambda s: [mod.apply_1q(s, q, h) for q in range(n)]),
        ("apply_cnot_layer", lambda s: mod.apply_cnot_layer(s, controls, targets)),
        ("apply_pauli", lambda s: mod.apply_pauli(s, x_mask, z_mask)),
    ):
        best = float("inf")
        for _ in range(repeats):
            state = base.copy()
            t0 = time.perf_counter()
            fn(state)
            best = min(best, time.perf_counter() - t0)
        out[name] = best
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--qubits", type=int, default=16)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    backends = load_backends()
    results = {name: bench(mod, args.qubits, args.repeats)
               for name, mod in backends.items()}
    ops = list(next(iter(results.values())))
    print(f"{args.qubits} qubits, best of {args.repeats}")
    header = f"{'op':<18}" + "".join(f"{b:>12}" for b in results)
    print(header)
    for op in ops:
        row = f"{op:<18}" + "".join(f"{results[b][op] * 1e3:>10.3f}ms" for b in results)
        print(row)
    if "cython" in results:
        for op in ops:
            ratio = results["python"][op] / results["cython"][op]
            print(f"{op}: cython is {ratio:.1f}x the fallback")


if __name__ == "__main__":
    main()
