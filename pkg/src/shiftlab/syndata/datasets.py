"""Dataset assembly and line-delimited serialization."""
from __future__ import annotations

import json
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..core.types import Modality, Sample, TaskDescriptor, TaskType
from .captions import caption_instruction, render_caption
from .qa import render_qa
from .scenes import Scene, generate_scene, scene_from_dict, scene_key

MIN_TEST = 50


@dataclass(frozen=True)
class TaskDataset:
    descriptor: TaskDescriptor
    train: tuple[Sample, ...]
    val: tuple[Sample, ...]
    test: tuple[Sample, ...]
    seed: int

    def split(self, name: str) -> tuple[Sample, ...]:
        return {"train": self.train, "val": self.val, "test": self.test}[name]


def dataset_rng(dataset_id: str, seed: int) -> np.random.Generator:
    """Independent stream per dataset: run seed spliced with the id hash."""
    ss = np.random.SeedSequence([seed, zlib.crc32(dataset_id.encode())])
    return np.random.default_rng(ss)


def _distinct_scenes(
    modality: Modality, rng: np.random.Generator, count: int
) -> list[Scene]:
    seen: dict[str, Scene] = {}
    attempts = 0
    while len(seen) < count:
        attempts += 1
        if attempts > 200 * count + 10_000:
            raise RuntimeError(
                f"scene space too small for {count} distinct {modality.value} scenes"
            )
        scene = generate_scene(modality, rng)
        seen.setdefault(scene_key(scene), scene)
    return list(seen.values())[:count]


def _to_sample(scene: Scene, descriptor: TaskDescriptor) -> Sample:
    if descriptor.task_type is TaskType.CAPTIONING:
        return Sample(
            modality_input=scene,
            input_text=caption_instruction(descriptor.modality),
            target_text=render_caption(scene),
        )
    question, answer = render_qa(scene)
    return Sample(modality_input=scene, input_text=question, target_text=answer)


def generate_task_dataset(
    descriptor: TaskDescriptor,
    sizes: tuple[int, int, int] | None = None,
    seed: int = 0,
) -> TaskDataset:
    if sizes is None:
        sizes = (descriptor.n_samples, MIN_TEST, max(MIN_TEST, 64))
    n_train, n_val, n_test = sizes
    if min(sizes) < 1:
        raise ValueError(f"split sizes must be positive, got {sizes}")
    if n_test < MIN_TEST:
        raise ValueError(f"test split must hold at least {MIN_TEST} samples, got {n_test}")
    rng = dataset_rng(descriptor.dataset_id, seed)
    scenes = _distinct_scenes(descriptor.modality, rng, n_train + n_val + n_test)
    samples = [_to_sample(s, descriptor) for s in scenes]
    return TaskDataset(
        descriptor=descriptor,
        train=tuple(samples[:n_train]),
        val=tuple(samples[n_train : n_train + n_val]),
        test=tuple(samples[n_train + n_val :]),
        seed=seed,
    )


def save_dataset(dataset: TaskDataset, path: str | Path) -> None:
    lines = []
    for split in ("train", "val", "test"):
        for sample in dataset.split(split):
            record = {
                "modality": dataset.descriptor.modality.value,
                "scene": sample.modality_input.to_dict(),
                "input_text": sample.input_text,
                "target_text": sample.target_text,
                "split": split,
            }
            lines.append(json.dumps(record, sort_keys=True, separators=(",", ":")))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_dataset(
    path: str | Path, descriptor: TaskDescriptor, seed: int = 0
) -> TaskDataset:
    splits: dict[str, list[Sample]] = {"train": [], "val": [], "test": []}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line:
            continue
        rec = json.loads(line)
        splits[rec["split"]].append(
            Sample(
                modality_input=scene_from_dict(rec["scene"]),
                input_text=rec["input_text"],
                target_text=rec["target_text"],
            )
        )
    return TaskDataset(
        descriptor=descriptor,
        train=tuple(splits["train"]),
        val=tuple(splits["val"]),
        test=tuple(splits["test"]),
        seed=seed,
    )
