"""Replay of step-score tables through the metric arithmetic.

Input rows: method, order, task_index, step, task_type, dataset, score.
Bundled under data/ are the step scores of the large-scale reference
experiments this lab miniaturizes; replaying them validates forgetting
ratios and aggregates against the published summary numbers.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .core.types import TaskType
from .metrics import ScoreMatrix, aggregate

BUNDLED = ("order1", "order2")


@dataclass(frozen=True)
class ReplayBlock:
    method: str
    order: str
    matrix: ScoreMatrix
    aggregates: dict


def bundled_fixture_path(order: str) -> Path:
    if order not in BUNDLED:
        raise ValueError(f"unknown bundled order {order!r}; have {BUNDLED}")
    return Path(
        str(resources.files("shiftlab").joinpath(f"data/step_scores_{order}.csv"))
    )


def load_step_scores(path: str | Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    required = {"method", "order", "task_index", "step", "task_type", "dataset", "score"}
    if rows and not required <= set(rows[0]):
        raise ValueError(f"missing columns: {sorted(required - set(rows[0]))}")
    return rows


def replay_metrics(path: str | Path) -> list[ReplayBlock]:
    """One ReplayBlock per (method, order), in file order of first appearance."""
    rows = load_step_scores(path)
    if not rows:
        raise ValueError("no rows in step-score file")
    groups: dict[tuple[str, str], list[dict]] = {}
    for r in rows:
        groups.setdefault((r["method"], r["order"]), []).append(r)

    blocks = []
    for (method, order), rs in groups.items():
        task_types = {}
        dataset_ids = {}
        for r in rs:
            i = int(r["task_index"])
            task_types[i] = TaskType(r["task_type"])
            dataset_ids[i] = r["dataset"]
        m = ScoreMatrix(task_types=task_types, dataset_ids=dataset_ids)
        for r in rs:
            m.set(int(r["task_index"]), int(r["step"]), float(r["score"]))
        for i in range(1, m.n_tasks + 1):
            if (i, i) not in m.scores:
                raise ValueError(
                    f"{method}/{order}: missing diagonal score for task {i} "
                    f"({dataset_ids.get(i, '?')})"
                )
        blocks.append(
            ReplayBlock(method=method, order=order, matrix=m, aggregates=aggregate(m))
        )
    return blocks
