"""Scoring: consensus n-gram caption metric, exact-match QA accuracy, the
triangular score matrix, forgetting ratios, and run-level aggregates.

Scale conventions: per-item caption scores live on the 0..10 scale of the
reference implementation of the metric; score-matrix captioning entries are
the corpus mean times 10 (0..100, as results tables print them); QA entries
are accuracy percentages.
"""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field

from .core.text import normalize
from .core.types import TaskType

N_MAX = 4


def _ngram_counts(text: str) -> list[Counter]:
    toks = normalize(text).split()
    out = []
    for n in range(1, N_MAX + 1):
        out.append(Counter(tuple(toks[i : i + n]) for i in range(len(toks) - n + 1)))
    return out


def cider(
    candidates: dict, references: dict
) -> tuple[dict, float]:
    """candidates: id -> text; references: id -> list of texts.

    Returns (per-item scores on 0..10, corpus mean). Document frequency is
    counted once per id over its reference set; idf uses the number of ids
    in the reference corpus.
    """
    for cid in candidates:
        if cid not in references or not references[cid]:
            raise ValueError(f"candidate {cid!r} has no reference")
    n_docs = len(references)
    log_n = math.log(max(1, n_docs))
    ref_counts = {
        cid: [_ngram_counts(r) for r in refs] for cid, refs in references.items()
    }
    df: list[Counter] = [Counter() for _ in range(N_MAX)]
    for counts_per_ref in ref_counts.values():
        for n in range(N_MAX):
            seen = set()
            for rc in counts_per_ref:
                seen.update(rc[n].keys())
            for g in seen:
                df[n][g] += 1

    def tfidf(counts: Counter, n: int) -> dict:
        return {
            g: tf * (log_n - math.log(max(1.0, df[n][g])))
            for g, tf in counts.items()
        }

    def cosine(a: dict, b: dict) -> float:
        na = math.sqrt(sum(v * v for v in a.values()))
        nb = math.sqrt(sum(v * v for v in b.values()))
        if na == 0.0 or nb == 0.0:
            return 0.0
        dot = sum(v * b[g] for g, v in a.items() if g in b)
        return dot / (na * nb)

    per_item: dict = {}
    for cid, text in candidates.items():
        cand = _ngram_counts(text)
        refs = ref_counts[cid]
        total = 0.0
        for n in range(N_MAX):
            cvec = tfidf(cand[n], n)
            sim = sum(cosine(cvec, tfidf(rc[n], n)) for rc in refs) / len(refs)
            total += sim
        per_item[cid] = 10.0 * total / N_MAX
    corpus = sum(per_item.values()) / len(per_item) if per_item else 0.0
    return per_item, corpus


def qa_accuracy(predictions: list[str], answers: list[str]) -> float:
    if len(predictions) != len(answers):
        raise ValueError(
            f"length mismatch: {len(predictions)} predictions, {len(answers)} answers"
        )
    hits = sum(normalize(p) == normalize(a) for p, a in zip(predictions, answers))
    return 100.0 * hits / len(answers)


def forgetting_ratio(s_ii: float, s_iT: float) -> float:
    """Relative drop in percent; negative means the task improved later."""
    if s_ii == 0.0:
        raise ValueError("undefined ratio: score right after training is 0")
    return 100.0 * (s_ii - s_iT) / s_ii


@dataclass
class ScoreMatrix:
    """s[task i, step j] = test score of task i after training task j, i <= j."""

    task_types: dict[int, TaskType]
    dataset_ids: dict[int, str] = field(default_factory=dict)
    scores: dict[tuple[int, int], float] = field(default_factory=dict)

    @property
    def n_tasks(self) -> int:
        return len(self.task_types)

    def set(self, task: int, step: int, score: float) -> None:
        if not 1 <= task <= step <= self.n_tasks:
            raise ValueError(f"out of triangular domain: task {task}, step {step}")
        self.scores[(task, step)] = float(score)

    def get(self, task: int, step: int) -> float:
        if not 1 <= task <= step <= self.n_tasks:
            raise ValueError(f"out of triangular domain: task {task}, step {step}")
        return self.scores[(task, step)]

    def missing(self) -> list[tuple[int, int]]:
        t = self.n_tasks
        return [
            (i, j)
            for i in range(1, t + 1)
            for j in range(i, t + 1)
            if (i, j) not in self.scores
        ]

    def final_column(self) -> dict[int, float]:
        t = self.n_tasks
        return {i: self.get(i, t) for i in range(1, t + 1)}

    def to_canonical_json(self) -> str:
        data = {
            "n_tasks": self.n_tasks,
            "task_types": {str(i): t.value for i, t in self.task_types.items()},
            "dataset_ids": {str(i): d for i, d in sorted(self.dataset_ids.items())},
            "scores": {f"s/{i}/{j}": v for (i, j), v in self.scores.items()},
        }
        return json.dumps(data, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ScoreMatrix":
        data = json.loads(text)
        m = cls(
            task_types={int(i): TaskType(t) for i, t in data["task_types"].items()},
            dataset_ids={int(i): d for i, d in data.get("dataset_ids", {}).items()},
        )
        for key, v in data["scores"].items():
            _, i, j = key.split("/")
            m.set(int(i), int(j), float(v))
        return m


def aggregate(matrix: ScoreMatrix, literal_mean_over_all: bool = False) -> dict:
    """Final-column means by task type plus forgetting ratios.

    avg_forget averages tasks 1..T-1 by default: the last task has not had
    a chance to be forgotten and its ratio is identically zero. The flag
    switches to a plain mean over all T tasks.
    """
    gaps = matrix.missing()
    if gaps:
        raise ValueError(f"incomplete matrix, missing cells {gaps}")
    t = matrix.n_tasks
    final = matrix.final_column()
    cap = [final[i] for i in range(1, t + 1) if matrix.task_types[i] is TaskType.CAPTIONING]
    qa = [final[i] for i in range(1, t + 1) if matrix.task_types[i] is TaskType.QA]
    per_task = {
        i: forgetting_ratio(matrix.get(i, i), final[i]) for i in range(1, t + 1)
    }
    if literal_mean_over_all:
        avg_forget = sum(per_task.values()) / t
    else:
        avg_forget = (
            sum(per_task[i] for i in range(1, t)) / (t - 1) if t > 1 else 0.0
        )
    return {
        "avg_cider": sum(cap) / len(cap) if cap else float("nan"),
        "avg_acc": sum(qa) / len(qa) if qa else float("nan"),
        "avg_forget": avg_forget,
        "per_task_forget": per_task,
    }
