"""Compiled twins of the numpy reference kernels.

Same signatures and semantics as ``numpy_ops``; explicit loops because
nopython mode lacks axis-reductions and batched einsum. cache=True keeps
compilation a one-time cost per machine.
"""
from __future__ import annotations

import numpy as np
from numba import njit

GELU_C = 0.7978845608028654
GELU_A = 0.044715


@njit(cache=True)
def softmax_rows(x: np.ndarray) -> np.ndarray:
    xc = np.ascontiguousarray(x)
    n = xc.shape[-1]
    flat = xc.reshape(xc.size // n, n)
    out = np.empty_like(flat)
    for i in range(flat.shape[0]):
        mx = flat[i, 0]
        for j in range(1, n):
            if flat[i, j] > mx:
                mx = flat[i, j]
        s = 0.0
        for j in range(n):
            e = np.exp(flat[i, j] - mx)
            out[i, j] = e
            s += e
        inv = 1.0 / s
        for j in range(n):
            out[i, j] *= inv
    return out.reshape(xc.shape)


@njit(cache=True)
def gelu_fwd(x: np.ndarray) -> np.ndarray:
    xc = np.ascontiguousarray(x)
    flat = xc.reshape(xc.size)
    out = np.empty_like(flat)
    for i in range(flat.size):
        v = flat[i]
        inner = GELU_C * (v + GELU_A * v * v * v)
        out[i] = 0.5 * v * (1.0 + np.tanh(inner))
    return out.reshape(xc.shape)


@njit(cache=True)
def gelu_bwd(x: np.ndarray, dy: np.ndarray) -> np.ndarray:
    xc = np.ascontiguousarray(x)
    dyc = np.ascontiguousarray(dy)
    xf = xc.reshape(xc.size)
    dyf = dyc.reshape(dyc.size)
    out = np.empty_like(xf)
    for i in range(xf.size):
        v = xf[i]
        inner = GELU_C * (v + GELU_A * v * v * v)
        t = np.tanh(inner)
        din = GELU_C * (1.0 + 3.0 * GELU_A * v * v)
        out[i] = dyf[i] * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * din)
    return out.reshape(xc.shape)


@njit(cache=True)
def layernorm_fwd(x, gamma, beta, eps=1e-5):
    n, d = x.shape
    y = np.empty_like(x)
    mean = np.empty(n)
    rstd = np.empty(n)
    for i in range(n):
        m = 0.0
        for j in range(d):
            m += x[i, j]
        m /= d
        var = 0.0
        for j in range(d):
            diff = x[i, j] - m
            var += diff * diff
        var /= d
        r = 1.0 / np.sqrt(var + eps)
        mean[i] = m
        rstd[i] = r
        for j in range(d):
            y[i, j] = (x[i, j] - m) * r * gamma[j] + beta[j]
    return y, mean, rstd


@njit(cache=True)
def layernorm_bwd(dy, x, gamma, mean, rstd):
    n, d = x.shape
    dx = np.empty_like(x)
    dgamma = np.zeros(d)
    dbeta = np.zeros(d)
    for i in range(n):
        m1 = 0.0
        m2 = 0.0
        for j in range(d):
            xhat = (x[i, j] - mean[i]) * rstd[i]
            dxh = dy[i, j] * gamma[j]
            m1 += dxh
            m2 += dxh * xhat
            dgamma[j] += dy[i, j] * xhat
            dbeta[j] += dy[i, j]
        m1 /= d
        m2 /= d
        for j in range(d):
            xhat = (x[i, j] - mean[i]) * rstd[i]
            dxh = dy[i, j] * gamma[j]
            dx[i, j] = rstd[i] * (dxh - m1 - xhat * m2)
    return dx, dgamma, dbeta


@njit(cache=True)
def attention_fwd(q, k, v, bias):
    b, h, t, d = q.shape
    scale = 1.0 / np.sqrt(d)
    probs = np.empty((b, h, t, t))
    out = np.zeros((b, h, t, d))
    for bi in range(b):
        for hi in range(h):
            for ti in range(t):
                mx = -1e300
                for si in range(t):
                    s = 0.0
                    for di in range(d):
                        s += q[bi, hi, ti, di] * k[bi, hi, si, di]
                    s = s * scale + bias[bi, ti, si]
                    probs[bi, hi, ti, si] = s
                    if s > mx:
                        mx = s
                tot = 0.0
                for si in range(t):
                    e = np.exp(probs[bi, hi, ti, si] - mx)
                    probs[bi, hi, ti, si] = e
                    tot += e
                inv = 1.0 / tot
                for si in range(t):
                    p = probs[bi, hi, ti, si] * inv
                    probs[bi, hi, ti, si] = p
                    for di in range(d):
                        out[bi, hi, ti, di] += p * v[bi, hi, si, di]
    return out, probs


@njit(cache=True)
def attention_bwd(dout, q, k, v, probs):
    b, h, t, d = q.shape
    scale = 1.0 / np.sqrt(d)
    dq = np.zeros_like(q)
    dk = np.zeros_like(k)
    dv = np.zeros_like(v)
    for bi in range(b):
        for hi in range(h):
            for ti in range(t):
                inner = 0.0
                dprow = np.empty(t)
                for si in range(t):
                    dp = 0.0
                    for di in range(d):
                        dp += dout[bi, hi, ti, di] * v[bi, hi, si, di]
                        dv[bi, hi, si, di] += probs[bi, hi, ti, si] * dout[bi, hi, ti, di]
                    dprow[si] = dp
                    inner += dp * probs[bi, hi, ti, si]
                for si in range(t):
                    ds = probs[bi, hi, ti, si] * (dprow[si] - inner)
                    for di in range(d):
                        dq[bi, hi, ti, di] += ds * k[bi, hi, si, di] * scale
                        dk[bi, hi, si, di] += ds * q[bi, hi, ti, di] * scale
    return dq, dk, dv


@njit(cache=True)
def adamw_update(p, g, m, v, lr, beta1, beta2, eps, weight_decay, step):
    pf = p.reshape(p.size)
    gf = np.ascontiguousarray(g).reshape(g.size)
    mf = m.reshape(m.size)
    vf = v.reshape(v.size)
    c1 = 1.0 - beta1**step
    c2 = 1.0 - beta2**step
    for i in range(pf.size):
        mf[i] = beta1 * mf[i] + (1.0 - beta1) * gf[i]
        vf[i] = beta2 * vf[i] + (1.0 - beta2) * gf[i] * gf[i]
        mhat = mf[i] / c1
        vhat = vf[i] / c2
        pf[i] -= lr * (mhat / (np.sqrt(vhat) + eps) + weight_decay * pf[i])
