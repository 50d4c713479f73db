"""Aligned text tables, CSV dumps, and plots for score matrices.

Every renderer takes ``(label, ScoreMatrix)`` rows so results from live runs
and from the bundled fixtures print identically.
"""
from __future__ import annotations

import csv
import math
from pathlib import Path

from .core.types import TaskType
from .metrics import ScoreMatrix, aggregate

LabeledMatrix = tuple[str, ScoreMatrix]


def _fmt(v: float) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "-"
    return f"{v:.2f}"


def _render_rows(header: list[str], body: list[list[str]]) -> str:
    widths = [len(h) for h in header]
    for row in body:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    lines = []
    lines.append("  ".join(h.rjust(w) for h, w in zip(header, widths)))
    lines.append("  ".join("-" * w for w in widths))
    for row in body:
        lines.append("  ".join(c.rjust(w) for c, w in zip(row, widths)))
    return "\n".join(lines) + "\n"


def summary_table(rows: list[LabeledMatrix], literal_mean_over_all: bool = False) -> str:
    header = ["method", "avg_cider", "avg_acc", "avg_forget"]
    body = []
    for label, matrix in rows:
        agg = aggregate(matrix, literal_mean_over_all=literal_mean_over_all)
        body.append(
            [label, _fmt(agg["avg_cider"]), _fmt(agg["avg_acc"]), _fmt(agg["avg_forget"])]
        )
    return _render_rows(header, body)


def forgetting_table(rows: list[LabeledMatrix]) -> str:
    if not rows:
        raise ValueError("no rows to render")
    n = rows[0][1].n_tasks
    header = ["method"] + [f"task{i}" for i in range(1, n)]
    body = []
    for label, matrix in rows:
        per_task = aggregate(matrix)["per_task_forget"]
        body.append([label] + [_fmt(per_task[i]) for i in range(1, n)])
    return _render_rows(header, body)


def matrix_table(label: str, matrix: ScoreMatrix) -> str:
    n = matrix.n_tasks
    header = [label] + [f"step{j}" for j in range(1, n + 1)]
    body = []
    for i in range(1, n + 1):
        cells = [matrix.dataset_ids[i]]
        for j in range(1, n + 1):
            cells.append(_fmt(matrix.get(i, j)) if j >= i else "")
        body.append(cells)
    return _render_rows(header, body)


def full_report(rows: list[LabeledMatrix]) -> str:
    parts = ["summary\n", summary_table(rows), "\nforgetting ratios\n", forgetting_table(rows)]
    for label, matrix in rows:
        parts.append(f"\nscores by step: {label}\n")
        parts.append(matrix_table(label, matrix))
    return "".join(parts)


def write_summary_csv(path: str | Path, rows: list[LabeledMatrix]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["method", "avg_cider", "avg_acc", "avg_forget"])
        for label, matrix in rows:
            agg = aggregate(matrix)
            w.writerow(
                [label, _fmt(agg["avg_cider"]), _fmt(agg["avg_acc"]), _fmt(agg["avg_forget"])]
            )


def write_matrix_csv(path: str | Path, matrix: ScoreMatrix) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["task_index", "dataset", "task_type", "step", "score"])
        for (i, j), score in sorted(matrix.scores.items()):
            w.writerow(
                [i, matrix.dataset_ids[i], matrix.task_types[i].value, j, f"{score:.4f}"]
            )


def write_report(out_dir: str | Path, rows: list[LabeledMatrix]) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(full_report(rows), encoding="utf-8")
    write_summary_csv(out / "summary.csv", rows)
    for label, matrix in rows:
        write_matrix_csv(out / f"scores_{label}.csv", matrix)
    return out / "report.txt"


# ---- plots ----


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_scores(path: str | Path, rows: list[LabeledMatrix]) -> None:
    """One panel per method: score of each task as later tasks arrive."""
    plt = _pyplot()
    fig, axes = plt.subplots(1, len(rows), figsize=(4.2 * len(rows), 3.4), squeeze=False)
    for ax, (label, matrix) in zip(axes[0], rows):
        n = matrix.n_tasks
        for i in range(1, n + 1):
            xs = list(range(i, n + 1))
            ys = [matrix.get(i, j) for j in xs]
            ax.plot(xs, ys, marker="o", label=matrix.dataset_ids[i])
        ax.set_title(label)
        ax.set_xlabel("training step")
        ax.set_ylabel("score")
        ax.set_xticks(range(1, n + 1))
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_forgetting(path: str | Path, rows: list[LabeledMatrix]) -> None:
    """Grouped bars: per-task forgetting ratio for each method."""
    plt = _pyplot()
    n = rows[0][1].n_tasks
    tasks = list(range(1, n))
    width = 0.8 / max(1, len(rows))
    fig, ax = plt.subplots(figsize=(1.6 + 1.2 * len(tasks), 3.4))
    for k, (label, matrix) in enumerate(rows):
        per_task = aggregate(matrix)["per_task_forget"]
        xs = [t + k * width for t in tasks]
        ax.bar(xs, [per_task[t] for t in tasks], width=width, label=label)
    ax.set_xticks([t + 0.4 - width / 2 for t in tasks])
    ax.set_xticklabels([rows[0][1].dataset_ids[t] for t in tasks], fontsize=8)
    ax.set_ylabel("forgetting ratio (%)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
