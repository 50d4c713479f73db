"""Decoder-only transformer over pre-assembled input embeddings.

Forward returns logits plus the cache needed by the hand-written backward
pass. Backward takes d(loss)/d(logits) and a set of parameter names to
differentiate; expensive weight-gradient matmuls are skipped for names not
asked for. Low-rank adapter pairs ride on the four attention projections:
W_eff = W + A @ B, with gradients routed to W, A, B as requested.
"""
from __future__ import annotations

import numpy as np

from .. import kernels as K
from ..core.config import ModelDims

ATTN_PROJS = ("q", "k", "v", "o")


def init_lm_params(
    dims: ModelDims, vocab_size: int, rng: np.random.Generator
) -> dict[str, np.ndarray]:
    d = dims.embed_dim
    std = 0.02
    p: dict[str, np.ndarray] = {
        "lm.tok_emb": rng.normal(0.0, std, (vocab_size, d)),
        "lm.pos_emb": rng.normal(0.0, std, (dims.context_len, d)),
    }
    for i in range(dims.n_layers):
        pre = f"lm.layer{i}"
        p[f"{pre}.ln1.g"] = np.ones(d)
        p[f"{pre}.ln1.b"] = np.zeros(d)
        for proj in ATTN_PROJS:
            p[f"{pre}.attn.w{proj}"] = rng.normal(0.0, std, (d, d))
        p[f"{pre}.ln2.g"] = np.ones(d)
        p[f"{pre}.ln2.b"] = np.zeros(d)
        p[f"{pre}.mlp.w1"] = rng.normal(0.0, std, (d, 4 * d))
        p[f"{pre}.mlp.b1"] = np.zeros(4 * d)
        p[f"{pre}.mlp.w2"] = rng.normal(0.0, std, (4 * d, d))
        p[f"{pre}.mlp.b2"] = np.zeros(d)
    p["lm.lnf.g"] = np.ones(d)
    p["lm.lnf.b"] = np.zeros(d)
    p["lm.head"] = rng.normal(0.0, std, (d, vocab_size))
    return p


def init_adapter_params(dims: ModelDims, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """A is small gaussian, B starts at zero, so adapters begin as identity."""
    d, r = dims.embed_dim, dims.adapter_rank
    p: dict[str, np.ndarray] = {}
    for i in range(dims.n_layers):
        for proj in ATTN_PROJS:
            p[f"adapter.layer{i}.{proj}.a"] = rng.normal(0.0, 0.02, (d, r))
            p[f"adapter.layer{i}.{proj}.b"] = np.zeros((r, d))
    return p


def adapter_keys(dims: ModelDims) -> list[str]:
    return [
        f"adapter.layer{i}.{proj}.{ab}"
        for i in range(dims.n_layers)
        for proj in ATTN_PROJS
        for ab in ("a", "b")
    ]


def _split_heads(x2d: np.ndarray, b: int, t: int, h: int, hd: int) -> np.ndarray:
    return np.ascontiguousarray(
        x2d.reshape(b, t, h, hd).transpose(0, 2, 1, 3)
    )


def _merge_heads(x4d: np.ndarray, b: int, t: int, d: int) -> np.ndarray:
    return np.ascontiguousarray(x4d.transpose(0, 2, 1, 3)).reshape(b * t, d)


def effective_weight(params: dict[str, np.ndarray], layer: int, proj: str) -> np.ndarray:
    return (
        params[f"lm.layer{layer}.attn.w{proj}"]
        + params[f"adapter.layer{layer}.{proj}.a"]
        @ params[f"adapter.layer{layer}.{proj}.b"]
    )


def lm_forward(
    params: dict[str, np.ndarray],
    x0: np.ndarray,
    bias: np.ndarray,
    dims: ModelDims,
) -> tuple[np.ndarray, dict]:
    """x0: (B, T, d) input embeddings; bias: (B, T, T) additive attention mask."""
    b, t, d = x0.shape
    h = dims.n_heads
    hd = d // h
    x = x0
    layers = []
    for i in range(dims.n_layers):
        pre = f"lm.layer{i}"
        c: dict = {"x_in": x}
        xf = x.reshape(b * t, d)
        a, mu1, r1 = K.layernorm_fwd(xf, params[f"{pre}.ln1.g"], params[f"{pre}.ln1.b"])
        c["a"], c["mu1"], c["r1"] = a, mu1, r1
        weff = {p: effective_weight(params, i, p) for p in ATTN_PROJS}
        c["weff"] = weff
        q = _split_heads(a @ weff["q"], b, t, h, hd)
        k = _split_heads(a @ weff["k"], b, t, h, hd)
        v = _split_heads(a @ weff["v"], b, t, h, hd)
        heads, probs = K.attention_fwd(q, k, v, bias)
        merged = _merge_heads(heads, b, t, d)
        c["q"], c["k"], c["v"], c["probs"], c["merged"] = q, k, v, probs, merged
        x = x + (merged @ weff["o"]).reshape(b, t, d)
        c["x_mid"] = x
        xmf = x.reshape(b * t, d)
        a2, mu2, r2 = K.layernorm_fwd(
            xmf, params[f"{pre}.ln2.g"], params[f"{pre}.ln2.b"]
        )
        c["a2"], c["mu2"], c["r2"] = a2, mu2, r2
        u = a2 @ params[f"{pre}.mlp.w1"] + params[f"{pre}.mlp.b1"]
        g = K.gelu_fwd(u)
        c["u"], c["g"] = u, g
        x = x + (g @ params[f"{pre}.mlp.w2"] + params[f"{pre}.mlp.b2"]).reshape(b, t, d)
        layers.append(c)
    xlf = x.reshape(b * t, d)
    af, muf, rf = K.layernorm_fwd(xlf, params["lm.lnf.g"], params["lm.lnf.b"])
    logits = (af @ params["lm.head"]).reshape(b, t, -1)
    cache = {
        "layers": layers,
        "x_last": x,
        "af": af,
        "muf": muf,
        "rf": rf,
        "shape": (b, t, d, h, hd),
    }
    return logits, cache


def lm_backward(
    params: dict[str, np.ndarray],
    cache: dict,
    dlogits: np.ndarray,
    dims: ModelDims,
    want: frozenset[str],
) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Returns (grads for requested names, d(loss)/d(x0))."""
    b, t, d, h, hd = cache["shape"]
    grads: dict[str, np.ndarray] = {}
    dlf = dlogits.reshape(b * t, -1)
    if "lm.head" in want:
        grads["lm.head"] = cache["af"].T @ dlf
    daf = dlf @ params["lm.head"].T
    dxl, dgf, dbf = K.layernorm_bwd(
        daf, cache["x_last"].reshape(b * t, d), params["lm.lnf.g"], cache["muf"], cache["rf"]
    )
    if "lm.lnf.g" in want:
        grads["lm.lnf.g"] = dgf
    if "lm.lnf.b" in want:
        grads["lm.lnf.b"] = dbf
    dx = dxl.reshape(b, t, d)

    for i in reversed(range(dims.n_layers)):
        pre = f"lm.layer{i}"
        c = cache["layers"][i]
        w1 = params[f"{pre}.mlp.w1"]
        w2 = params[f"{pre}.mlp.w2"]
        dm = dx.reshape(b * t, d)
        dg_out = dm @ w2.T
        if f"{pre}.mlp.w2" in want:
            grads[f"{pre}.mlp.w2"] = c["g"].T @ dm
        if f"{pre}.mlp.b2" in want:
            grads[f"{pre}.mlp.b2"] = dm.sum(axis=0)
        du = K.gelu_bwd(c["u"], dg_out)
        if f"{pre}.mlp.w1" in want:
            grads[f"{pre}.mlp.w1"] = c["a2"].T @ du
        if f"{pre}.mlp.b1" in want:
            grads[f"{pre}.mlp.b1"] = du.sum(axis=0)
        da2 = du @ w1.T
        dxm_add, dg2, db2 = K.layernorm_bwd(
            da2,
            c["x_mid"].reshape(b * t, d),
            params[f"{pre}.ln2.g"],
            c["mu2"],
            c["r2"],
        )
        if f"{pre}.ln2.g" in want:
            grads[f"{pre}.ln2.g"] = dg2
        if f"{pre}.ln2.b" in want:
            grads[f"{pre}.ln2.b"] = db2
        dx_mid = dx + dxm_add.reshape(b, t, d)

        weff = c["weff"]
        do_out = dx_mid.reshape(b * t, d)
        dmerged = do_out @ weff["o"].T
        dweff = {}
        need_o = _need_weight(want, i, "o")
        if need_o:
            dweff["o"] = c["merged"].T @ do_out
        dheads = _split_heads(dmerged, b, t, h, hd)
        dq, dk, dv = K.attention_bwd(dheads, c["q"], c["k"], c["v"], c["probs"])
        dqm = _merge_heads(dq, b, t, d)
        dkm = _merge_heads(dk, b, t, d)
        dvm = _merge_heads(dv, b, t, d)
        for proj, dmat in (("q", dqm), ("k", dkm), ("v", dvm)):
            if _need_weight(want, i, proj):
                dweff[proj] = c["a"].T @ dmat
        da = dqm @ weff["q"].T + dkm @ weff["k"].T + dvm @ weff["v"].T
        dxa_add, dg1, db1 = K.layernorm_bwd(
            da,
            c["x_in"].reshape(b * t, d),
            params[f"{pre}.ln1.g"],
            c["mu1"],
            c["r1"],
        )
        if f"{pre}.ln1.g" in want:
            grads[f"{pre}.ln1.g"] = dg1
        if f"{pre}.ln1.b" in want:
            grads[f"{pre}.ln1.b"] = db1
        dx = dx_mid + dxa_add.reshape(b, t, d)

        for proj, dwe in dweff.items():
            base = f"{pre}.attn.w{proj}"
            if base in want:
                grads[base] = dwe
            ka = f"adapter.layer{i}.{proj}.a"
            kb = f"adapter.layer{i}.{proj}.b"
            if ka in want:
                grads[ka] = dwe @ params[kb].T
            if kb in want:
                grads[kb] = params[ka].T @ dwe
    return grads, dx


def _need_weight(want: frozenset[str], layer: int, proj: str) -> bool:
    return (
        f"lm.layer{layer}.attn.w{proj}" in want
        or f"adapter.layer{layer}.{proj}.a" in want
        or f"adapter.layer{layer}.{proj}.b" in want
    )
