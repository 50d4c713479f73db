"""Shared helpers: a small vocabulary and model dims for fast model tests."""
from __future__ import annotations

from shiftlab.core.config import ModelDims
from shiftlab.core.vocab import Vocabulary, build_vocabulary
from shiftlab.ikd import build_instruction_corpus
from shiftlab.syndata.qa import enumerate_qa
from shiftlab.syndata.captions import caption_instruction, render_caption
from shiftlab.syndata.scenes import generate_scene
from shiftlab.core.types import Modality

_VOCAB_CACHE: dict[str, Vocabulary] = {}


def tiny_vocab() -> Vocabulary:
    """Covers captions, questions, answers, and instructions for all
    modalities over a deterministic scene sweep; much smaller than the
    benchmark closure but sufficient for every test corpus."""
    if "v" not in _VOCAB_CACHE:
        texts = []
        for m in Modality:
            for seed in range(120):
                scene = generate_scene(m, seed)
                texts.append(render_caption(scene))
                for q, a in enumerate_qa(scene):
                    texts.append(q)
                    texts.append(a)
            texts.append(caption_instruction(m))
        texts.extend(build_instruction_corpus())
        _VOCAB_CACHE["v"] = build_vocabulary(texts)
    return _VOCAB_CACHE["v"]


def tiny_dims(**kw) -> ModelDims:
    base = dict(
        embed_dim=16,
        n_layers=1,
        n_heads=2,
        context_len=40,
        adapter_rank=2,
        feature_dim=8,
        proj_hidden=8,
    )
    base.update(kw)
    return ModelDims(**base)
