#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-numpy fallback.

Covers the layer ops at the shapes the training loop actually uses
(batch 120, hidden widths 300/600), the fused optimizer/target updates, and
one slot of the planning oracle's backward-induction sweep.

Run:  python benchmarks/bench_kernels.py [--repeat N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np
from threadpoolctl import threadpool_limits

from hemsim._kernels import available_backends


def bench(fn, repeat: int) -> float:
    fn()
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best * 1e3


def layer_cases(rng):
    cases = []
    for m, n in [(9, 300), (300, 600), (600, 600), (600, 1)]:
        x = rng.standard_normal((120, m))
        w = rng.standard_normal((m, n)) / np.sqrt(m)
        b = rng.standard_normal(n)
        act = np.full(n, 1, dtype=np.int8)  # relu
        cases.append((f"affine fwd 120x{m}->{n}", "affine_forward", (x, w, b, act)))
    x = rng.standard_normal((120, 600))
    w = rng.standard_normal((600, 600)) / 24.5
    b = rng.standard_normal(600)
    act = np.full(600, 1, dtype=np.int8)
    out = np.maximum(x @ w + b, 0.0)
    d_out = rng.standard_normal((120, 600))
    cases.append(("affine bwd 120x600->600", "affine_backward", (d_out, out, x, w, act)))
    return cases


def elementwise_cases(rng):
    n = 903_300  # parameter count of the value network
    p = rng.standard_normal(n)
    g = rng.standard_normal(n)
    m = np.zeros(n)
    v = np.zeros(n)
    tgt = rng.standard_normal(n)
    return [
        (f"adam {n} params", "adam_step", (p, g, m, v, 3, 1e-3, 0.9, 0.999, 1e-8)),
        (f"blend {n} params", "blend", (tgt, p, 0.001)),
    ]


def dp_case(rng):
    nb, nt = 55, 93
    v_next = rng.uniform(0, 10, (nb, nt))
    b_grid = np.linspace(0.6, 6.0, nb)
    t_grid = np.linspace(56.0, 102.0, nt)
    f_levels = np.linspace(-3.0, 3.0, 13)
    e_levels = np.linspace(0.0, 2.0, 9)
    v_out = np.empty((nb, nt))
    best_f = np.empty((nb, nt), dtype=np.int32)
    best_e = np.empty((nb, nt), dtype=np.int32)
    args = (v_next, b_grid, t_grid, f_levels, e_levels,
            1.5, 0.8, 95.0, 0.25,
            0.95, 0.95, 0.6, 6.0, 3.0, 3.0, 2.0,
            66.2, 75.2, 0.7, 2.5 / 0.14, 0.01, 0.9, 1e6,
            v_out, best_f, best_e)
    return [("dp sweep 55x93 grid, 117 actions", "dp_backward_sweep", args)]


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args()

    backends = available_backends()
    print(f"backends: {', '.join(backends)}")
    rng = np.random.default_rng(0)
    cases = layer_cases(rng) + elementwise_cases(rng) + dp_case(rng)

    with threadpool_limits(limits=1, user_api="blas"):
        header = f"{'kernel':34s}" + "".join(f"{name:>12s}" for name in backends)
        print(header)
        print("-" * len(header))
        for label, fn_name, fn_args in cases:
            times = {}
            for name, mod in backends.items():
                fn = getattr(mod, fn_name)
                call_args = tuple(a.copy() if isinstance(a, np.ndarray) else a for a in fn_args)
                times[name] = bench(lambda: fn(*call_args), args.repeat)
            row = f"{label:34s}" + "".join(f"{times[n]:10.3f}ms" for n in backends)
            if "compiled" in times and "python" in times:
                row += f"   x{times['python'] / times['compiled']:.2f}"
            print(row)


if __name__ == "__main__":
    main()
