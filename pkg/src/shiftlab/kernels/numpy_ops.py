"""Reference implementations of the hot numeric kernels, pure numpy.

These define the semantics; the numba twins in ``numba_ops`` must agree
within floating-point tolerance. All arrays are float64.
"""
from __future__ import annotations

import numpy as np

GELU_C = 0.7978845608028654  # sqrt(2/pi)
GELU_A = 0.044715


def softmax_rows(x: np.ndarray) -> np.ndarray:
    """Stable softmax over the last axis."""
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def gelu_fwd(x: np.ndarray) -> np.ndarray:
    inner = GELU_C * (x + GELU_A * x**3)
    return 0.5 * x * (1.0 + np.tanh(inner))


def gelu_bwd(x: np.ndarray, dy: np.ndarray) -> np.ndarray:
    inner = GELU_C * (x + GELU_A * x**3)
    t = np.tanh(inner)
    din = GELU_C * (1.0 + 3.0 * GELU_A * x**2)
    dgelu = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t**2) * din
    return dy * dgelu


def layernorm_fwd(
    x: np.ndarray, gamma: np.ndarray, beta: np.ndarray, eps: float = 1e-5
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """x: (N, D). Returns (y, mean, rstd); mean/rstd are saved for backward."""
    mean = x.mean(axis=-1)
    var = ((x - mean[:, None]) ** 2).mean(axis=-1)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean[:, None]) * rstd[:, None]
    return xhat * gamma + beta, mean, rstd


def layernorm_bwd(
    dy: np.ndarray,
    x: np.ndarray,
    gamma: np.ndarray,
    mean: np.ndarray,
    rstd: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    xhat = (x - mean[:, None]) * rstd[:, None]
    dxhat = dy * gamma
    m1 = dxhat.mean(axis=-1, keepdims=True)
    m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
    dx = rstd[:, None] * (dxhat - m1 - xhat * m2)
    dgamma = (dy * xhat).sum(axis=0)
    dbeta = dy.sum(axis=0)
    return dx, dgamma, dbeta


def attention_fwd(
    q: np.ndarray, k: np.ndarray, v: np.ndarray, bias: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Scaled dot-product attention.

    q, k, v: (B, H, T, D); bias: (B, T, T) additive (0 allowed, large
    negative blocked), shared across heads. Returns (out, probs).
    """
    scale = 1.0 / np.sqrt(q.shape[-1])
    scores = np.einsum("bhtd,bhsd->bhts", q, k) * scale + bias[:, None, :, :]
    probs = softmax_rows(scores)
    out = np.einsum("bhts,bhsd->bhtd", probs, v)
    return out, probs


def attention_bwd(
    dout: np.ndarray,
    q: np.ndarray,
    k: np.ndarray,
    v: np.ndarray,
    probs: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    scale = 1.0 / np.sqrt(q.shape[-1])
    dv = np.einsum("bhts,bhtd->bhsd", probs, dout)
    dprobs = np.einsum("bhtd,bhsd->bhts", dout, v)
    inner = (dprobs * probs).sum(axis=-1, keepdims=True)
    dscores = probs * (dprobs - inner)
    dq = np.einsum("bhts,bhsd->bhtd", dscores, k) * scale
    dk = np.einsum("bhts,bhtd->bhsd", dscores, q) * scale
    return dq, dk, dv


def adamw_update(
    p: np.ndarray,
    g: np.ndarray,
    m: np.ndarray,
    v: np.ndarray,
    lr: float,
    beta1: float,
    beta2: float,
    eps: float,
    weight_decay: float,
    step: int,
) -> None:
    """Decoupled-weight-decay Adam; updates p, m, v in place."""
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * g * g
    mhat = m / (1.0 - beta1**step)
    vhat = v / (1.0 - beta2**step)
    p -= lr * (mhat / (np.sqrt(vhat) + eps) + weight_decay * p)
