"""Canonical run setups: the deterministic vocabulary closure, the six-task
and four-task orders, per-method configurations, and dataset builders.

The vocabulary is built from a sweep of generated scenes (captions plus every
enumerable question and answer), the task instructions, the pure-text
instruction pool, and the formatted question-generation prompts. The sweep is
seeded, so the closure and the resulting vocabulary are bit-stable.
"""
from __future__ import annotations

from .core.config import ModelDims, RunConfig, default_task_order
from .core.types import Method, Modality, TaskDescriptor, TaskType
from .core.vocab import Vocabulary, build_vocabulary
from .ikd import _instruction_pool
from .ptgm import (
    MODALITY_WORD,
    ROUND1_TEMPLATE,
    ROUND2_TEMPLATE,
    ROUND3_TEMPLATE,
)
from .syndata.captions import caption_instruction, render_caption
from .syndata.datasets import TaskDataset, generate_task_dataset
from .syndata.qa import enumerate_qa
from .syndata.scenes import generate_scene

CLOSURE_SWEEP = 200

# frozen size of default_vocabulary(); recomputed from scratch in tests
DEFAULT_VOCAB_SIZE = 78


def closure_texts() -> list[str]:
    """Every text the benchmark can produce, up to word identity."""
    texts: list[str] = []
    for modality in Modality:
        for seed in range(CLOSURE_SWEEP):
            scene = generate_scene(modality, seed)
            texts.append(render_caption(scene))
            for question, answer in enumerate_qa(scene):
                texts.append(question)
                texts.append(answer)
        texts.append(caption_instruction(modality))
    texts.extend(_instruction_pool())
    for modality in Modality:
        word = MODALITY_WORD[modality]
        texts.append(ROUND1_TEMPLATE.format(modality=word, caption="a red circle"))
        texts.append(
            ROUND2_TEMPLATE.format(modality=word, caption="a red circle", answer="red")
        )
        texts.append(
            ROUND3_TEMPLATE.format(
                modality=word,
                caption="a red circle",
                question="what color is the circle ?",
            )
        )
    return texts


def default_vocabulary() -> Vocabulary:
    return build_vocabulary(closure_texts())


def ablation_task_order(n_samples: int = 160) -> tuple[TaskDescriptor, ...]:
    """Four-task order reaching the first pseudo-target firing at task 3."""
    spec = [
        (Modality.IMG, TaskType.CAPTIONING),
        (Modality.VID, TaskType.CAPTIONING),
        (Modality.VID, TaskType.QA),
        (Modality.IMG, TaskType.QA),
    ]
    return tuple(
        TaskDescriptor(
            index=i + 1,
            modality=m,
            task_type=t,
            dataset_id=f"{m.value.lower()}-{'cap' if t is TaskType.CAPTIONING else 'qa'}",
            n_samples=n_samples,
        )
        for i, (m, t) in enumerate(spec)
    )


ABLATION_DIMS = ModelDims(
    embed_dim=64,
    n_layers=2,
    n_heads=4,
    context_len=48,
    adapter_rank=8,
    feature_dim=16,
    proj_hidden=64,
)


def default_config(method: Method = Method.MOINCL, seed: int = 0) -> RunConfig:
    return RunConfig(task_order=default_task_order(), seed=seed).with_method(method)


def ablation_config(method: Method = Method.MOINCL, seed: int = 0) -> RunConfig:
    """Small-model four-task setup sized for minutes-scale runs.

    The adapter-plus-projection pathway needs a few hundred steps per task
    before outputs become scene-dependent, hence the high epoch count.
    """
    cfg = RunConfig(
        task_order=ablation_task_order(),
        dims=ABLATION_DIMS,
        learning_rate=1e-2,
        weight_decay=0.0,
        epochs_per_task=60,
        batch_size=16,
        pretrain_steps=200,
        pretrain_lr=3e-3,
        eval_samples=50,
        seed=seed,
    )
    return cfg.with_method(method)


def build_datasets(config: RunConfig) -> dict[int, TaskDataset]:
    """Train/val/test datasets for every task in the order, keyed by index."""
    out: dict[int, TaskDataset] = {}
    for task in config.task_order:
        sizes = (task.n_samples, 50, max(50, config.eval_samples))
        out[task.index] = generate_task_dataset(task, sizes=sizes, seed=config.seed)
    return out
