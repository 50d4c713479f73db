"""Times the compiled kernels against the plain-numpy reference path.

Run: python3 benchmarks/bench_kernels.py
The compiled path is what SHIFTLAB_NUMBA=1 (the default) selects at import;
the reference path is what SHIFTLAB_NUMBA=0 falls back to.
"""
from __future__ import annotations

import time

import numpy as np

from shiftlab.kernels import numpy_ops
from shiftlab.kernels import numba_ops

B, T, D = 16, 48, 16
H = 4


def bench(label: str, fn, *args, repeat: int = 50) -> float:
    fn(*args)  # warm (JIT compile on the compiled path)
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat


def main() -> None:
    rng = np.random.default_rng(0)
    q = rng.standard_normal((B * H, T, D))
    k = rng.standard_normal((B * H, T, D))
    v = rng.standard_normal((B * H, T, D))
    bias = np.zeros((B * H, T, T))
    x = rng.standard_normal((B, T, 64))
    g = np.ones(64)
    b = np.zeros(64)
    dy = rng.standard_normal((B, T, 64))
    p = rng.standard_normal((64, 64))
    grad = rng.standard_normal((64, 64))
    m = np.zeros_like(p)
    vv = np.zeros_like(p)

    rows = []
    for label, mod in (("numpy", numpy_ops), ("numba", numba_ops)):
        t_attn = bench(label, mod.attention_fwd, q, k, v, bias)
        out, probs = mod.attention_fwd(q, k, v, bias)
        t_attn_b = bench(label, mod.attention_bwd, out, q, k, v, probs)
        t_ln = bench(label, mod.layernorm_fwd, x, g, b, 1e-5)
        y, mean, rstd = mod.layernorm_fwd(x, g, b, 1e-5)
        t_ln_b = bench(label, mod.layernorm_bwd, dy, x, g, mean, rstd)
        t_gelu = bench(label, mod.gelu_fwd, x)
        t_soft = bench(label, mod.softmax_rows, x)
        t_adam = bench(
            label, mod.adamw_update, p, grad, m, vv, 1e-3, 0.9, 0.999, 1e-8, 0.01, 1
        )
        rows.append(
            (label, t_attn, t_attn_b, t_ln, t_ln_b, t_gelu, t_soft, t_adam)
        )

    names = ["backend", "attn_fwd", "attn_bwd", "ln_fwd", "ln_bwd", "gelu", "softmax", "adamw"]
    print("  ".join(f"{n:>9}" for n in names))
    for row in rows:
        label, *times = row
        print(f"{label:>9}  " + "  ".join(f"{t*1e6:8.1f}u" for t in times))
    np_row, nb_row = rows[0][1:], rows[1][1:]
    speedup = "  ".join(f"{a/b:8.2f}x" for a, b in zip(np_row, nb_row))
    print(f"{'speedup':>9}  {speedup}")


if __name__ == "__main__":
    main()
