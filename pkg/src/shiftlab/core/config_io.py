"""Config serialization: YAML/JSON in, canonical JSON out.

Canonical form sorts keys and uses a fixed layout, so emitting a config,
reading it back, and emitting again is byte-identical. Run logs rely on
that to diff configs textually.
"""
from __future__ import annotations

import json
from dataclasses import fields
from pathlib import Path

import yaml

from .config import ModelDims, RunConfig, TaskOverride
from .types import FusionMode, Method, Modality, TaskDescriptor, TaskType


def config_to_dict(cfg: RunConfig) -> dict:
    return {
        "task_order": [
            {
                "index": t.index,
                "modality": t.modality.value,
                "task_type": t.task_type.value,
                "dataset_id": t.dataset_id,
                "n_samples": t.n_samples,
            }
            for t in cfg.task_order
        ],
        "method": cfg.method.value,
        "lambda_p": cfg.lambda_p,
        "lambda_p_prime": cfg.lambda_p_prime,
        "alpha": cfg.alpha,
        "fusion_mode": cfg.fusion_mode.value,
        "learning_rate": cfg.learning_rate,
        "weight_decay": cfg.weight_decay,
        "epochs_per_task": cfg.epochs_per_task,
        "batch_size": cfg.batch_size,
        "seed": cfg.seed,
        "ewc_lambda": cfg.ewc_lambda,
        "lwf_weight": cfg.lwf_weight,
        "eval_samples": cfg.eval_samples,
        "pretrain_steps": cfg.pretrain_steps,
        "pretrain_lr": cfg.pretrain_lr,
        "pseudo_per_batch": cfg.pseudo_per_batch,
        "dims": {f.name: getattr(cfg.dims, f.name) for f in fields(ModelDims)},
        "overrides": {
            str(idx): {
                k: v
                for k, v in (
                    ("lambda_p", ov.lambda_p),
                    ("lambda_p_prime", ov.lambda_p_prime),
                    ("alpha", ov.alpha),
                )
                if v is not None
            }
            for idx, ov in sorted(cfg.overrides.items())
        },
    }


def config_from_dict(data: dict) -> RunConfig:
    known = {
        "task_order",
        "method",
        "lambda_p",
        "lambda_p_prime",
        "alpha",
        "fusion_mode",
        "learning_rate",
        "weight_decay",
        "epochs_per_task",
        "batch_size",
        "seed",
        "ewc_lambda",
        "lwf_weight",
        "eval_samples",
        "pretrain_steps",
        "pretrain_lr",
        "pseudo_per_batch",
        "dims",
        "overrides",
    }
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    if "task_order" not in data:
        raise ValueError("config missing task_order")

    tasks = tuple(
        TaskDescriptor(
            index=int(t["index"]),
            modality=Modality(t["modality"]),
            task_type=TaskType(t["task_type"]),
            dataset_id=str(t["dataset_id"]),
            n_samples=int(t["n_samples"]),
        )
        for t in data["task_order"]
    )

    kwargs: dict = {"task_order": tasks}
    if "method" in data:
        kwargs["method"] = Method(data["method"])
    if "fusion_mode" in data:
        kwargs["fusion_mode"] = FusionMode(data["fusion_mode"])
    for key in (
        "lambda_p",
        "lambda_p_prime",
        "alpha",
        "learning_rate",
        "weight_decay",
        "pretrain_lr",
    ):
        if key in data:
            kwargs[key] = float(data[key])
    for key in (
        "epochs_per_task",
        "batch_size",
        "seed",
        "eval_samples",
        "pretrain_steps",
        "pseudo_per_batch",
    ):
        if key in data:
            kwargs[key] = int(data[key])
    for key in ("ewc_lambda", "lwf_weight"):
        if key in data:
            kwargs[key] = float(data[key])
    if "dims" in data:
        kwargs["dims"] = ModelDims(**{k: int(v) for k, v in data["dims"].items()})
    if "overrides" in data:
        kwargs["overrides"] = {
            int(idx): TaskOverride(
                lambda_p=ov.get("lambda_p"),
                lambda_p_prime=ov.get("lambda_p_prime"),
                alpha=ov.get("alpha"),
            )
            for idx, ov in data["overrides"].items()
        }
    return RunConfig(**kwargs)


def to_canonical_json(cfg: RunConfig) -> str:
    return json.dumps(config_to_dict(cfg), sort_keys=True, indent=2) + "\n"


def load_config(path: str | Path) -> RunConfig:
    """Read a YAML (or JSON; JSON is a YAML subset) config file."""
    raw = Path(path).read_text(encoding="utf-8")
    data = yaml.safe_load(raw)
    if not isinstance(data, dict):
        raise ValueError(f"config root must be a mapping, got {type(data).__name__}")
    return config_from_dict(data)


def save_canonical(cfg: RunConfig, path: str | Path) -> None:
    Path(path).write_text(to_canonical_json(cfg), encoding="utf-8")
