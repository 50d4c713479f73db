"""Kernel backend selection.

``SHIFTLAB_NUMBA=0`` forces the pure-numpy reference path; anything else
(or unset) uses the compiled kernels when numba imports cleanly. The
chosen backend is fixed at import time so a whole run uses one backend.
"""
from __future__ import annotations

import os

import numpy as np

from . import numpy_ops

_flag = os.environ.get("SHIFTLAB_NUMBA", "1")

if _flag == "0":
    _impl = numpy_ops
    BACKEND = "numpy"
else:
    try:
        from . import numba_ops as _impl  # noqa: F401

        BACKEND = "numba"
    except ImportError:
        _impl = numpy_ops
        BACKEND = "numpy"

softmax_rows = _impl.softmax_rows
gelu_fwd = _impl.gelu_fwd
gelu_bwd = _impl.gelu_bwd
layernorm_fwd = _impl.layernorm_fwd
layernorm_bwd = _impl.layernorm_bwd
attention_fwd = _impl.attention_fwd
attention_bwd = _impl.attention_bwd
adamw_update = _impl.adamw_update


def warmup() -> None:
    """Trigger jit compilation on tiny inputs so timed code paths stay hot."""
    rng = np.random.default_rng(0)
    x = rng.standard_normal((2, 4))
    g = np.ones(4)
    b = np.zeros(4)
    softmax_rows(x)
    gelu_bwd(x, gelu_fwd(x))
    y, mean, rstd = layernorm_fwd(x, g, b)
    layernorm_bwd(y, x, g, mean, rstd)
    q = rng.standard_normal((1, 2, 3, 4))
    bias = np.zeros((1, 3, 3))
    out, probs = attention_fwd(q, q, q, bias)
    attention_bwd(out, q, q, q, probs)
    p = rng.standard_normal(4)
    adamw_update(p, p.copy(), np.zeros(4), np.zeros(4), 1e-3, 0.9, 0.999, 1e-8, 0.0, 1)


__all__ = [
    "BACKEND",
    "adamw_update",
    "attention_bwd",
    "attention_fwd",
    "gelu_bwd",
    "gelu_fwd",
    "layernorm_bwd",
    "layernorm_fwd",
    "softmax_rows",
    "warmup",
    "numpy_ops",
]
