"""Run configuration: model dimensions, training hyperparameters, task order."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping

from .types import FusionMode, Method, Modality, TaskDescriptor, TaskType


@dataclass(frozen=True)
class ModelDims:
    embed_dim: int = 128
    n_layers: int = 2
    n_heads: int = 4
    context_len: int = 64
    adapter_rank: int = 8
    feature_dim: int = 24
    proj_hidden: int = 64

    def __post_init__(self) -> None:
        if self.embed_dim % self.n_heads != 0:
            raise ValueError(
                f"embed_dim {self.embed_dim} not divisible by n_heads {self.n_heads}"
            )
        for name in (
            "embed_dim",
            "n_layers",
            "n_heads",
            "context_len",
            "adapter_rank",
            "feature_dim",
            "proj_hidden",
        ):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class TaskOverride:
    """Per-task-index hyperparameter overrides; None means inherit."""

    lambda_p: float | None = None
    lambda_p_prime: float | None = None
    alpha: float | None = None


@dataclass(frozen=True)
class RunConfig:
    task_order: tuple[TaskDescriptor, ...]
    method: Method = Method.MOINCL
    lambda_p: float = 1.0
    lambda_p_prime: float = 1.0
    alpha: float = 0.999
    fusion_mode: FusionMode = FusionMode.PER_STEP
    learning_rate: float = 1e-3
    weight_decay: float = 5e-2
    epochs_per_task: int = 3
    batch_size: int = 16
    seed: int = 0
    ewc_lambda: float = 100.0
    lwf_weight: float = 1.0
    eval_samples: int = 64
    pretrain_steps: int = 300
    pretrain_lr: float = 3e-3
    pseudo_per_batch: int = 8
    dims: ModelDims = field(default_factory=ModelDims)
    overrides: Mapping[int, TaskOverride] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.task_order:
            raise ValueError("task_order must be non-empty")
        indices = [t.index for t in self.task_order]
        if indices != list(range(1, len(indices) + 1)):
            raise ValueError(f"task indices must be 1..N in order, got {indices}")
        if self.lambda_p < 0 or self.lambda_p_prime < 0:
            raise ValueError("lambda weights must be >= 0")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0,1], got {self.alpha}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")
        if self.epochs_per_task < 1:
            raise ValueError("epochs_per_task must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.ewc_lambda < 0:
            raise ValueError("ewc_lambda must be >= 0")
        if self.lwf_weight < 0:
            raise ValueError("lwf_weight must be >= 0")
        if self.eval_samples < 1:
            raise ValueError("eval_samples must be >= 1")
        if self.pseudo_per_batch < 0:
            raise ValueError("pseudo_per_batch must be >= 0")
        for idx in self.overrides:
            if not any(t.index == idx for t in self.task_order):
                raise ValueError(f"override for unknown task index {idx}")

    def lambda_p_for(self, task_index: int) -> float:
        ov = self.overrides.get(task_index)
        if ov is not None and ov.lambda_p is not None:
            return ov.lambda_p
        return self.lambda_p

    def lambda_p_prime_for(self, task_index: int) -> float:
        ov = self.overrides.get(task_index)
        if ov is not None and ov.lambda_p_prime is not None:
            return ov.lambda_p_prime
        return self.lambda_p_prime

    def alpha_for(self, task_index: int) -> float:
        ov = self.overrides.get(task_index)
        if ov is not None and ov.alpha is not None:
            return ov.alpha
        return self.alpha

    def with_method(self, method: Method) -> "RunConfig":
        """Method override keeping everything else; used by the CLI flag."""
        fusion = self.fusion_mode
        alpha = self.alpha
        if method in (Method.FINETUNE, Method.LWF, Method.EWC):
            fusion = FusionMode.OFF
        elif method is Method.EWF:
            # single end-of-task average of new and old weights
            fusion = FusionMode.END_OF_TASK
            alpha = 0.5
        return replace(self, method=method, fusion_mode=fusion, alpha=alpha)


def default_task_order(n_samples: int = 160) -> tuple[TaskDescriptor, ...]:
    """Six-task stream alternating modality and task type."""
    spec = [
        (Modality.IMG, TaskType.CAPTIONING),
        (Modality.VID, TaskType.CAPTIONING),
        (Modality.VID, TaskType.QA),
        (Modality.IMG, TaskType.QA),
        (Modality.AUD, TaskType.CAPTIONING),
        (Modality.AUD, TaskType.QA),
    ]
    return tuple(
        TaskDescriptor(
            index=i + 1,
            modality=m,
            task_type=p,
            dataset_id=f"{m.value}-{'cap' if p is TaskType.CAPTIONING else 'qa'}",
            n_samples=n_samples,
        )
        for i, (m, p) in enumerate(spec)
    )
