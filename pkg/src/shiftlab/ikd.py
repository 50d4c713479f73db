"""Instruction distillation: keep the adapted LM close to its previous self
on a fixed, pure-text instruction set.

The instruction set is synthesized once from closed templates over the
micro-world vocabulary, stays identical across all tasks of a run, and
contains no dataset target (rehearsal stays memory-free). The loss is the
mean over instructions of the per-position KL between the current and old
LM, teacher-forced over the instruction's own tokens; the old model is a
frozen snapshot and receives no gradient.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations, product
from pathlib import Path

import numpy as np

from .core.text import normalize
from .core.vocab import SPECIALS
from .losses import _smooth
from .model.mllm import MLLM
from .syndata.scenes import COLORS, DIRECTIONS, EVENTS, LOUDNESS, SHAPES

CORPUS_SIZE = 512
_CORPUS_SEED = 0x1D5


def _instruction_pool() -> list[str]:
    pool: list[str] = []
    pool += ["describe the image", "describe the audio", "describe the video"]
    pool += [f"what color is the {s} ?" for s in SHAPES]
    pool += [f"what shape is the {c} one ?" for c in COLORS]
    pool += [f"how loud is the {e} ?" for e in EVENTS]
    pool += [f"what comes after the {e} ?" for e in EVENTS]
    pool += ["what is the first sound ?"]
    pool += [f"which way is the {c} {s} moving ?" for c, s in product(COLORS, SHAPES)]
    pool += [f"what is moving {d} ?" for d in DIRECTIONS]
    pool += [f"what is above a {c} {s} ?" for c, s in product(COLORS, SHAPES)]
    pool += [f"describe the {c} {s}" for c, s in product(COLORS, SHAPES)]
    pool += [f"describe a {l} {e}" for l, e in product(LOUDNESS, EVENTS)]
    pool += [
        f"describe a {c} {s} moving {d}"
        for c, s, d in product(COLORS, SHAPES, DIRECTIONS)
    ]
    pool += [
        f"describe a {c1} {s1} above a {c2} {s2}"
        for c1, c2 in permutations(COLORS, 2)
        for s1, s2 in permutations(SHAPES, 2)
    ]
    pool += [
        f"describe a {l1} {e1} then a {l2} {e2}"
        for e1, e2 in permutations(EVENTS, 2)
        for l1, l2 in product(LOUDNESS, LOUDNESS)
    ]
    pool += [
        f"describe a {c1} {s1} beside a {c2} {s2}"
        for c1, c2 in permutations(COLORS, 2)
        for s1, s2 in permutations(SHAPES, 2)
    ]
    pool += [f"provide the direction of the {s}" for s in SHAPES]
    pool += [
        "generate a potential short answer from it",
        "provide just one or two words",
        "provide only the answer nothing else",
        "provide only one question and nothing else",
        "generate a question for the answer that can be inferred from the context",
        "answer the question using the given context",
        "the answer should be only one or two words",
    ]
    pool += [f"generate a question about the {c} {s}" for c, s in product(COLORS, SHAPES)]
    pool += [f"provide the color of the {s}" for s in SHAPES]
    pool += [f"provide the shape of the {c} one" for c in COLORS]
    seen = set()
    out = []
    for p in pool:
        if p not in seen:
            seen.add(p)
            out.append(p)
    return out


def build_instruction_corpus(n: int = CORPUS_SIZE) -> list[str]:
    """Deterministic sample of n instructions from the template pool."""
    pool = _instruction_pool()
    if n > len(pool):
        raise ValueError(f"asked for {n} instructions, pool has {len(pool)}")
    rng = np.random.default_rng(np.random.SeedSequence(_CORPUS_SEED))
    order = rng.permutation(len(pool))[:n]
    return [pool[int(i)] for i in sorted(order)]


@dataclass(frozen=True)
class InstructionSet:
    instructions: tuple[str, ...]
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.instructions:
            raise ValueError("instruction set must be non-empty")
        for ins in self.instructions:
            for sp in SPECIALS:
                if sp in ins:
                    raise ValueError(f"placeholder token {sp!r} in instruction")

    def sample(self, step: int, size: int) -> list[str]:
        """Deterministic per-step batch without replacement."""
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, 0x1CD, step]))
        size = min(size, len(self.instructions))
        idx = rng.choice(len(self.instructions), size=size, replace=False)
        return [self.instructions[int(i)] for i in idx]

    def save(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self.instructions) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path, seed: int = 0) -> "InstructionSet":
        lines = [
            ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln
        ]
        return cls(instructions=tuple(lines), seed=seed)


def assert_memory_free(instructions: tuple[str, ...], target_texts: set[str]) -> None:
    """Instructions must not replay any dataset target."""
    normalized_targets = {normalize(t) for t in target_texts}
    overlap = {i for i in instructions if normalize(i) in normalized_targets}
    if overlap:
        raise ValueError(f"instructions replay dataset targets: {sorted(overlap)[:3]}")


def _row_mean_kl(p: np.ndarray, q: np.ndarray, mask: np.ndarray) -> tuple[float, np.ndarray]:
    """Per-instruction position-mean KL, then mean over instructions.

    Returns (loss, dloss/dlogits_p) with the same (B, L, V) layout.
    """
    qs = _smooth(q)
    logratio = np.where(p > 0, np.log(np.maximum(p, 1e-300) / qs), 0.0)
    kl_pos = (p * logratio).sum(axis=-1)  # (B, L)
    lengths = mask.sum(axis=1)  # (B,)
    if (lengths == 0).any():
        raise ValueError("instruction with no scored positions")
    b = p.shape[0]
    loss = float(((kl_pos * mask).sum(axis=1) / lengths).mean())
    scale = (mask / lengths[:, None] / b)[..., None]
    grad = p * (logratio - kl_pos[..., None]) * scale
    return loss, grad


def ikd_loss(
    model: MLLM,
    old_params: dict[str, np.ndarray],
    instruction_batch: list[str],
) -> float:
    loss, _, _ = ikd_loss_and_grads(model, old_params, instruction_batch, want=None)
    return loss


def ikd_loss_and_grads(
    model: MLLM,
    old_params: dict[str, np.ndarray],
    instruction_batch: list[str],
    want: frozenset[str] | None,
) -> tuple[float, dict[str, np.ndarray], int]:
    """Returns (loss, grads w.r.t. wanted params, n scored positions).

    want=None skips the backward pass and returns empty grads.
    """
    if not instruction_batch:
        raise ValueError("empty instruction batch")
    items = [(None, "", text) for text in instruction_batch]
    batch = model.batch(items, None)
    dist_cur, cache = model.forward(batch)
    dist_old, _ = model.forward(batch, params=old_params)
    loss, grad = _row_mean_kl(dist_cur.probs, dist_old.probs, batch.loss_mask)
    if want is None:
        return loss, {}, dist_cur.n_scored
    grads = model.backward(cache, grad, want)
    return loss, grads, dist_cur.n_scored
