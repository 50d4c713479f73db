"""Shared domain types for the continual-learning lab.

Everything here is an immutable value object: state transitions return new
instances, so types can be shared freely across threads.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping


class Modality(str, Enum):
    IMG = "img"
    AUD = "aud"
    VID = "vid"


class TaskType(str, Enum):
    CAPTIONING = "captioning"
    QA = "qa"


class Method(str, Enum):
    FINETUNE = "finetune"
    LWF = "lwf"
    EWC = "ewc"
    EWF = "ewf"
    MOINCL = "moincl"


class FusionMode(str, Enum):
    PER_STEP = "per_step"
    END_OF_TASK = "end_of_task"
    OFF = "off"


@dataclass(frozen=True)
class TaskDescriptor:
    """One incremental task: position in the stream, modality, task type."""

    index: int
    modality: Modality
    task_type: TaskType
    dataset_id: str
    n_samples: int

    def __post_init__(self) -> None:
        if self.index < 1:
            raise ValueError(f"task index must be >= 1, got {self.index}")
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")


@dataclass(frozen=True)
class Sample:
    """A training triple: modality payload, input text, target text."""

    modality_input: object
    input_text: str
    target_text: str


@dataclass(frozen=True)
class PseudoSample:
    """Generated rehearsal pair for a previously learned task type."""

    modality_input: object
    pseudo_input_text: str
    pseudo_target_text: str
    source_task_type: TaskType

    def __post_init__(self) -> None:
        if not self.pseudo_target_text:
            raise ValueError("pseudo target text must be non-empty")
        if self.source_task_type is TaskType.QA:
            n_words = len(self.pseudo_target_text.split())
            if n_words > 2:
                raise ValueError(
                    f"qa pseudo answer must be at most 2 words, got {n_words}"
                )


@dataclass(frozen=True)
class LearnedState:
    """Which modalities and task types have been fully trained so far.

    ``learned_types`` may hold an empty entry for the modality of the task
    currently in progress; entries only gain members when a task commits.
    Both structures grow monotonically.
    """

    learned_modalities: frozenset[Modality] = frozenset()
    learned_types: Mapping[Modality, frozenset[TaskType]] = field(
        default_factory=dict
    )

    def types_for(self, modality: Modality) -> frozenset[TaskType]:
        return self.learned_types.get(modality, frozenset())

    def with_task_started(self, task: TaskDescriptor) -> "LearnedState":
        """Ensure the bookkeeping entry for an unseen modality exists."""
        if task.modality in self.learned_types:
            return self
        types = dict(self.learned_types)
        types[task.modality] = frozenset()
        return replace(self, learned_types=types)

    def with_task_committed(self, task: TaskDescriptor) -> "LearnedState":
        """Record the finished task's modality and task type. Idempotent."""
        types = dict(self.learned_types)
        types[task.modality] = types.get(task.modality, frozenset()) | {
            task.task_type
        }
        return LearnedState(
            learned_modalities=self.learned_modalities | {task.modality},
            learned_types=types,
        )

    def covers(self, other: "LearnedState") -> bool:
        """True if this state is a component-wise superset of ``other``."""
        if not other.learned_modalities <= self.learned_modalities:
            return False
        return all(
            other.types_for(m) <= self.types_for(m) for m in other.learned_types
        )


def update_learned_state(
    state: LearnedState, task: TaskDescriptor, *, commit: bool
) -> LearnedState:
    """Task-boundary transition: ``commit=False`` at task start, ``True`` at end."""
    if commit:
        return state.with_task_committed(task)
    return state.with_task_started(task)
