"""Loss kernels and regularizers, with analytic gradients w.r.t. logits.

Every sequence loss is a mean over unmasked positions, so batch padding
never changes a value. Gradients are returned against the logits that
produced the distribution (softmax is folded into the formulas).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model.seqdist import SequenceDistribution

Q_FLOOR = 1e-8


def _check_same_layout(p: SequenceDistribution, q: SequenceDistribution) -> None:
    if p.probs.shape != q.probs.shape:
        raise ValueError(f"shape mismatch: {p.probs.shape} vs {q.probs.shape}")
    if not np.array_equal(p.mask, q.mask):
        raise ValueError("mask mismatch between distributions")


def cross_entropy_seq(pred: SequenceDistribution, target_ids: np.ndarray) -> float:
    """Mean over unmasked positions of -ln p(target token)."""
    n = pred.n_scored
    if n == 0:
        raise ValueError("empty target")
    b, length = pred.mask.shape
    rows = np.arange(b)[:, None]
    cols = np.arange(length)[None, :]
    picked = pred.probs[rows, cols, target_ids]
    logp = np.where(pred.mask, np.log(np.maximum(picked, 1e-300)), 0.0)
    return float(-logp.sum() / n)


def cross_entropy_grad(
    pred: SequenceDistribution, target_ids: np.ndarray
) -> np.ndarray:
    """d(CE)/d(logits) at the scored positions: (p - onehot) / n_scored."""
    n = pred.n_scored
    if n == 0:
        raise ValueError("empty target")
    g = pred.probs.copy()
    b, length = pred.mask.shape
    rows = np.arange(b)[:, None]
    cols = np.arange(length)[None, :]
    g[rows, cols, target_ids] -= 1.0
    g *= pred.mask[..., None] / n
    return g


def _smooth(q: np.ndarray) -> np.ndarray:
    qs = np.maximum(q, Q_FLOOR)
    return qs / qs.sum(axis=-1, keepdims=True)


def kl_divergence_seq(p: SequenceDistribution, q: SequenceDistribution) -> float:
    """Mean over unmasked positions of sum_v p ln(p/q), q floored and renormalized."""
    _check_same_layout(p, q)
    n = p.n_scored
    if n == 0:
        raise ValueError("empty target")
    qs = _smooth(q.probs)
    terms = np.where(p.probs > 0, p.probs * np.log(np.maximum(p.probs, 1e-300) / qs), 0.0)
    per_pos = terms.sum(axis=-1)
    return float((per_pos * p.mask).sum() / n)


def kl_grad_wrt_p_logits(
    p: SequenceDistribution, q: SequenceDistribution
) -> np.ndarray:
    """d(KL(p||q))/d(p's logits): p_j (ln(p_j/q_j) - KL_pos), masked and averaged."""
    _check_same_layout(p, q)
    n = p.n_scored
    if n == 0:
        raise ValueError("empty target")
    qs = _smooth(q.probs)
    logratio = np.where(
        p.probs > 0, np.log(np.maximum(p.probs, 1e-300) / qs), 0.0
    )
    kl_pos = (p.probs * logratio).sum(axis=-1, keepdims=True)
    g = p.probs * (logratio - kl_pos)
    g *= p.mask[..., None] / n
    return g


# ---- EWC ----


@dataclass(frozen=True)
class FisherDiag:
    values: dict[str, np.ndarray]
    anchor: dict[str, np.ndarray]

    def __post_init__(self) -> None:
        if set(self.values) != set(self.anchor):
            raise ValueError("fisher/anchor key mismatch")
        for k, v in self.values.items():
            if v.shape != self.anchor[k].shape:
                raise ValueError(f"fisher shape mismatch at {k}")
            if (v < 0).any():
                raise ValueError(f"negative fisher values at {k}")


def ewc_penalty(
    params: dict[str, np.ndarray], fisher: FisherDiag, ewc_lambda: float
) -> float:
    total = 0.0
    for k, f in fisher.values.items():
        theta = params[k]
        if theta.shape != f.shape:
            raise ValueError(f"param shape mismatch at {k}")
        delta = theta - fisher.anchor[k]
        total += float((f * delta * delta).sum())
    return 0.5 * ewc_lambda * total


def ewc_penalty_grads(
    params: dict[str, np.ndarray],
    fisher: FisherDiag,
    ewc_lambda: float,
    want: frozenset[str],
) -> dict[str, np.ndarray]:
    grads = {}
    for k, f in fisher.values.items():
        if k in want:
            grads[k] = ewc_lambda * f * (params[k] - fisher.anchor[k])
    return grads


def estimate_fisher(
    model,
    samples,
    modality,
    n_batches: int = 8,
    batch_size: int = 16,
    seed: int = 0,
) -> FisherDiag:
    """Diagonal Fisher proxy: mean of squared task-loss gradients."""
    want = model.trainable_keys(modality)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xF15E]))
    acc: dict[str, np.ndarray] = {
        k: np.zeros_like(model.params[k]) for k in sorted(want)
    }
    used = 0
    for _ in range(n_batches):
        idx = rng.choice(len(samples), size=min(batch_size, len(samples)), replace=False)
        items = [
            (samples[i].modality_input, samples[i].input_text, samples[i].target_text)
            for i in idx
        ]
        batch = model.batch(items, modality)
        dist, cache = model.forward(batch)
        grads = model.backward(cache, cross_entropy_grad(dist, batch.target_ids), want)
        for k, g in grads.items():
            acc[k] += g * g
        used += 1
    values = {k: v / used for k, v in acc.items()}
    anchor = {k: model.params[k].copy() for k in acc}
    return FisherDiag(values=values, anchor=anchor)


# ---- parameter fusion ----


def fuse_params(
    theta_cur: dict[str, np.ndarray],
    theta_old: dict[str, np.ndarray],
    alpha: float,
) -> dict[str, np.ndarray]:
    """Element-wise convex combination alpha*cur + (1-alpha)*old."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0,1], got {alpha}")
    if set(theta_cur) != set(theta_old):
        raise ValueError("key mismatch between parameter sets")
    out = {}
    for k, cur in theta_cur.items():
        old = theta_old[k]
        if cur.shape != old.shape:
            raise ValueError(f"shape mismatch at {k}")
        out[k] = alpha * cur + (1.0 - alpha) * old
    return out
