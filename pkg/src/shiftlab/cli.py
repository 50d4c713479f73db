"""Command-line entry point.

Verbs: gen-data, train, eval, report, replay-metrics, plot. Each writes only
inside its --out directory (default: $SHIFTLAB_OUT or ./shiftlab_out).
`train` regenerates datasets deterministically from the config, so `gen-data`
artifacts are for inspection and external tooling, not a training dependency.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .benchmark import ablation_config, build_datasets, default_vocabulary
from .core.config import RunConfig
from .core.config_io import config_to_dict, load_config, save_canonical
from .core.types import Method
from .metrics import ScoreMatrix, aggregate
from .replay import bundled_fixture_path, replay_metrics
from .reporting import (
    full_report,
    plot_forgetting,
    plot_scores,
    write_report,
)

ENV_OUT = "SHIFTLAB_OUT"


def _default_out() -> str:
    return os.environ.get(ENV_OUT, "shiftlab_out")


def _load_run_config(args) -> RunConfig:
    if getattr(args, "config", None):
        cfg = load_config(args.config)
    else:
        cfg = ablation_config()
    if getattr(args, "seed", None) is not None:
        from dataclasses import replace

        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "method", None):
        cfg = cfg.with_method(Method(args.method))
    return cfg


def _cmd_gen_data(args) -> int:
    from .syndata.datasets import save_dataset

    cfg = _load_run_config(args)
    out = Path(args.out) / "data"
    out.mkdir(parents=True, exist_ok=True)
    datasets = build_datasets(cfg)
    for task in cfg.task_order:
        save_dataset(datasets[task.index], out / f"task{task.index}_{task.dataset_id}.jsonl")
    default_vocabulary().save(out / "vocab.txt")
    save_canonical(cfg, out / "config.json")
    print(f"wrote {len(datasets)} task datasets to {out}")
    return 0


def _cmd_train(args) -> int:
    from .trainer import run_order

    cfg = _load_run_config(args)
    out = Path(args.out) / "run"
    vocab = default_vocabulary()
    datasets = build_datasets(cfg)
    _, matrix, _ = run_order(
        cfg,
        vocab,
        datasets,
        out_dir=out,
        save_checkpoints=not args.no_checkpoints,
        progress=print if args.verbose else None,
    )
    save_canonical(cfg, out / "config.json")
    agg = aggregate(matrix)
    print(
        f"method {cfg.method.value}: avg_cider {agg['avg_cider']:.2f}  "
        f"avg_acc {agg['avg_acc']:.2f}  avg_forget {agg['avg_forget']:.2f}"
    )
    print(f"artifacts in {out}")
    return 0


def _cmd_eval(args) -> int:
    from .model.mllm import load_checkpoint
    from .trainer import evaluate_task

    cfg = _load_run_config(args)
    indices = {t.index: t for t in cfg.task_order}
    if args.task_index not in indices:
        raise ValueError(f"task index {args.task_index} not in the configured order")
    task = indices[args.task_index]
    vocab = default_vocabulary()
    model, _ = load_checkpoint(args.checkpoint, vocab)
    dataset = build_datasets(cfg)[task.index]
    score = evaluate_task(model, dataset, task)
    print(f"{score:.2f}")
    return 0


def _read_matrices(paths: list[str]) -> list[tuple[str, ScoreMatrix]]:
    rows = []
    for p in paths:
        text = Path(p).read_text(encoding="utf-8")
        rows.append((Path(p).stem, ScoreMatrix.from_json(text)))
    return rows


def _cmd_report(args) -> int:
    rows = _read_matrices(args.matrix)
    if args.out:
        path = write_report(Path(args.out) / "report", rows)
        print(f"wrote {path}")
    else:
        sys.stdout.write(full_report(rows))
    return 0


def _cmd_replay_metrics(args) -> int:
    if args.file:
        paths = [Path(args.file)]
    else:
        names = [args.fixture] if args.fixture else ["order1", "order2"]
        paths = [bundled_fixture_path(n) for n in names]
    for path in paths:
        for block in replay_metrics(path):
            agg = block.aggregates
            print(f"{block.method} / {block.order}")
            print(
                f"  avg_cider {agg['avg_cider']:.2f}  avg_acc {agg['avg_acc']:.2f}  "
                f"avg_forget {agg['avg_forget']:.2f}"
            )
            per_task = agg["per_task_forget"]
            n = block.matrix.n_tasks
            for i in range(1, n):
                print(
                    f"    task {i} ({block.matrix.dataset_ids[i]}): "
                    f"forget {per_task[i]:.2f}"
                )
    return 0


def _cmd_plot(args) -> int:
    rows = _read_matrices(args.matrix)
    out = Path(args.out) / "plots"
    out.mkdir(parents=True, exist_ok=True)
    plot_scores(out / "scores.png", rows)
    plot_forgetting(out / "forgetting.png", rows)
    print(f"wrote {out / 'scores.png'} and {out / 'forgetting.png'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shiftlab",
        description="continual-learning laboratory over synthetic scenes",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p, config=True):
        p.add_argument("--out", default=_default_out(), help="output root")
        if config:
            p.add_argument("--config", help="run config file (YAML or JSON)")
            p.add_argument("--seed", type=int, help="override config seed")
            p.add_argument(
                "--method",
                choices=[m.value for m in Method],
                help="override config method",
            )

    p = sub.add_parser("gen-data", help="write task datasets, vocabulary, config")
    common(p)
    p.set_defaults(fn=_cmd_gen_data)

    p = sub.add_parser("train", help="run the configured task order")
    common(p)
    p.add_argument("--no-checkpoints", action="store_true")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval", help="score one task's test split from a checkpoint")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--task-index", type=int, required=True)
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("report", help="render tables from score matrices")
    common(p, config=False)
    p.add_argument("--matrix", action="append", required=True, help="score matrix JSON")
    # table goes to stdout unless an output root is named explicitly
    p.set_defaults(fn=_cmd_report, out=None)

    p = sub.add_parser("replay-metrics", help="recompute aggregates from step scores")
    common(p, config=False)
    p.add_argument("--file", help="step-scores CSV")
    p.add_argument("--fixture", choices=["order1", "order2"], help="bundled fixture")
    p.set_defaults(fn=_cmd_replay_metrics)

    p = sub.add_parser("plot", help="score-vs-step lines and forgetting bars")
    common(p, config=False)
    p.add_argument("--matrix", action="append", required=True, help="score matrix JSON")
    p.set_defaults(fn=_cmd_plot)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except Exception as exc:  # surface a one-line error, nonzero status
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
