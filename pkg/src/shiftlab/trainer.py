"""Sequential training over a task order, with swappable forgetting-control
strategies, plus test-split evaluation into the score matrix.

Per-step flow: main loss on the current batch; strategy extra losses
(pseudo-target rehearsal, instruction distillation, old-model KL, quadratic
penalties); one optimizer update of the trainable subset; optional pull of
the adapter weights toward the previous task's snapshot. The first task
skips every preservation term: there is nothing to preserve yet.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import kernels as K
from .core.config import RunConfig
from .core.types import (
    FusionMode,
    LearnedState,
    Method,
    Modality,
    Sample,
    TaskDescriptor,
    TaskType,
    update_learned_state,
)
from .core.vocab import Vocabulary
from .ikd import InstructionSet, ikd_loss_and_grads
from .losses import (
    FisherDiag,
    cross_entropy_grad,
    cross_entropy_seq,
    estimate_fisher,
    ewc_penalty,
    ewc_penalty_grads,
    fuse_params,
    kl_divergence_seq,
    kl_grad_wrt_p_logits,
)
from .metrics import ScoreMatrix, cider, qa_accuracy
from .model.mllm import MLLM, Batch
from .ptgm import BackendKind, QaGeneratorBackend, generate_pseudo_batch
from .syndata.datasets import TaskDataset

CAPTION_MAX_LEN = 20
QA_MAX_LEN = 4
EVAL_CHUNK = 32


@dataclass(frozen=True)
class StepRecord:
    task_index: int
    step: int
    lr: float
    loss_main: float
    loss_p: float
    loss_ins: float
    aux: float
    total: float

    def to_dict(self) -> dict:
        return {
            "task_index": self.task_index,
            "step": self.step,
            "lr": self.lr,
            "loss_main": self.loss_main,
            "loss_p": self.loss_p,
            "loss_ins": self.loss_ins,
            "aux": self.aux,
            "total": self.total,
        }


@dataclass
class TrainLog:
    task_index: int
    method: Method
    records: list[StepRecord] = field(default_factory=list)
    wall_time: float = 0.0


@dataclass
class StepCtx:
    model: MLLM
    task: TaskDescriptor
    samples: list[Sample]
    batch: Batch
    dist: object
    cache: dict
    step: int
    want: frozenset[str]


ExtraLoss = tuple[str, float, dict[str, np.ndarray]]


@dataclass
class StrategyHooks:
    """The strategy surface: extra per-step losses, a post-update step hook,
    and an end-of-task hook. A plain fine-tune installs none of them."""

    extra_losses: Callable[[StepCtx], list[ExtraLoss]] | None = None
    post_update: Callable[[MLLM], None] | None = None
    end_of_task: Callable[[MLLM], None] | None = None


class AdamW:
    """Fresh optimizer state per task; linear warmup then cosine decay."""

    WARMUP_FRAC = 0.05

    def __init__(
        self,
        keys: frozenset[str],
        params: dict[str, np.ndarray],
        lr: float,
        weight_decay: float,
        total_steps: int,
    ):
        self.keys = sorted(keys)
        self.lr = lr
        self.weight_decay = weight_decay
        self.total_steps = max(1, total_steps)
        self.warmup = max(1, int(round(self.WARMUP_FRAC * self.total_steps)))
        self.t = 0
        self.m = {k: np.zeros_like(params[k]) for k in self.keys}
        self.v = {k: np.zeros_like(params[k]) for k in self.keys}

    def current_lr(self) -> float:
        if self.t < self.warmup:
            return self.lr * (self.t + 1) / self.warmup
        frac = (self.t - self.warmup) / max(1, self.total_steps - self.warmup)
        return self.lr * 0.5 * (1.0 + np.cos(np.pi * frac))

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> float:
        lr = self.current_lr()
        self.t += 1
        for k in self.keys:
            g = grads.get(k)
            if g is None:
                continue
            K.adamw_update(
                params[k], g, self.m[k], self.v[k],
                lr, 0.9, 0.999, 1e-8, self.weight_decay, self.t,
            )
        return float(lr)


def _merge_grads(into: dict[str, np.ndarray], extra: dict[str, np.ndarray]) -> None:
    for k, g in extra.items():
        if k in into:
            into[k] = into[k] + g
        else:
            into[k] = g


def build_hooks(
    config: RunConfig,
    task: TaskDescriptor,
    old_snapshot: dict[str, np.ndarray] | None,
    learned_state: LearnedState,
    instruction_set: InstructionSet | None,
    backend: QaGeneratorBackend | None,
    fisher_store: list[FisherDiag],
    model: MLLM,
    dataset: TaskDataset | None = None,
) -> StrategyHooks:
    method = config.method
    first_task = task.index == 1
    if method in (Method.LWF, Method.MOINCL, Method.EWF) and not first_task:
        if old_snapshot is None:
            raise ValueError(f"method {method.value} needs the previous snapshot")

    if method is Method.FINETUNE:
        return StrategyHooks()

    if method is Method.LWF:
        if first_task:
            return StrategyHooks()

        def lwf_extra(ctx: StepCtx) -> list[ExtraLoss]:
            dist_old, _ = ctx.model.forward(ctx.batch, params=old_snapshot)
            value = config.lwf_weight * kl_divergence_seq(ctx.dist, dist_old)
            dl = config.lwf_weight * kl_grad_wrt_p_logits(ctx.dist, dist_old)
            grads = ctx.model.backward(ctx.cache, dl, ctx.want)
            return [("aux", value, grads)]

        return StrategyHooks(extra_losses=lwf_extra)

    if method is Method.EWC:
        def ewc_extra(ctx: StepCtx) -> list[ExtraLoss]:
            if not fisher_store:
                return []
            value = 0.0
            grads: dict[str, np.ndarray] = {}
            for fisher in fisher_store:
                value += ewc_penalty(ctx.model.params, fisher, config.ewc_lambda)
                _merge_grads(
                    grads,
                    ewc_penalty_grads(
                        ctx.model.params, fisher, config.ewc_lambda, ctx.want
                    ),
                )
            return [("aux", value, grads)]

        if dataset is None:
            raise ValueError("the quadratic-penalty method needs the task dataset")

        def ewc_end(m: MLLM) -> None:
            fisher_store.append(
                estimate_fisher(
                    m,
                    dataset.train,
                    task.modality,
                    seed=config.seed + task.index,
                )
            )

        return StrategyHooks(extra_losses=ewc_extra, end_of_task=ewc_end)

    if method is Method.EWF:
        if first_task:
            return StrategyHooks()
        alpha = config.alpha_for(task.index)
        fusable = model.lm_component_keys()

        def ewf_end(m: MLLM) -> None:
            cur = {k: m.params[k] for k in fusable}
            old = {k: old_snapshot[k] for k in fusable}
            m.params.update(fuse_params(cur, old, alpha))

        return StrategyHooks(end_of_task=ewf_end)

    if method is Method.MOINCL:
        if first_task:
            return StrategyHooks()
        lam = config.lambda_p_for(task.index)
        lam_prime = config.lambda_p_prime_for(task.index)
        alpha = config.alpha_for(task.index)
        fusable = model.lm_component_keys()

        def moincl_extra(ctx: StepCtx) -> list[ExtraLoss]:
            out: list[ExtraLoss] = []
            pseudo = generate_pseudo_batch(
                ctx.samples, learned_state, task, backend, seed=config.seed
            )
            if pseudo:
                pseudo = pseudo[: config.pseudo_per_batch or len(pseudo)]
                items = [
                    (p.modality_input, p.pseudo_input_text, p.pseudo_target_text)
                    for p in pseudo
                ]
                pbatch = ctx.model.batch(items, task.modality)
                pdist, pcache = ctx.model.forward(pbatch)
                podist, _ = ctx.model.forward(pbatch, params=old_snapshot)
                value = lam * cross_entropy_seq(
                    pdist, pbatch.target_ids
                ) + lam_prime * kl_divergence_seq(pdist, podist)
                dl = lam * cross_entropy_grad(
                    pdist, pbatch.target_ids
                ) + lam_prime * kl_grad_wrt_p_logits(pdist, podist)
                grads = ctx.model.backward(pcache, dl, ctx.want)
                out.append(("loss_p", value, grads))
            texts = instruction_set.sample(
                task.index * 100_000 + ctx.step, config.batch_size
            )
            value, grads, _ = ikd_loss_and_grads(
                ctx.model, old_snapshot, texts, ctx.want
            )
            out.append(("loss_ins", value, grads))
            return out

        post_update = None
        end_of_task = None
        if config.fusion_mode is FusionMode.PER_STEP:
            def post_update(m: MLLM) -> None:
                cur = {k: m.params[k] for k in fusable}
                old = {k: old_snapshot[k] for k in fusable}
                m.params.update(fuse_params(cur, old, alpha))
        elif config.fusion_mode is FusionMode.END_OF_TASK:
            def end_of_task(m: MLLM) -> None:
                cur = {k: m.params[k] for k in fusable}
                old = {k: old_snapshot[k] for k in fusable}
                m.params.update(fuse_params(cur, old, alpha))

        return StrategyHooks(
            extra_losses=moincl_extra,
            post_update=post_update,
            end_of_task=end_of_task,
        )

    raise ValueError(f"unknown method {method!r}")


def train_task(
    model: MLLM,
    old_snapshot: dict[str, np.ndarray] | None,
    task: TaskDescriptor,
    dataset: TaskDataset,
    learned_state: LearnedState,
    config: RunConfig,
    hooks: StrategyHooks | None = None,
) -> tuple[MLLM, TrainLog]:
    t0 = time.perf_counter()
    if hooks is None:
        hooks = StrategyHooks()
    want = model.trainable_keys(task.modality)
    n = len(dataset.train)
    steps_per_epoch = (n + config.batch_size - 1) // config.batch_size
    total_steps = steps_per_epoch * config.epochs_per_task
    opt = AdamW(
        want, model.params, config.learning_rate, config.weight_decay, total_steps
    )
    order_rng = np.random.default_rng(
        np.random.SeedSequence([config.seed, 0x7A5C, task.index])
    )
    log = TrainLog(task_index=task.index, method=config.method)

    step = 0
    for _ in range(config.epochs_per_task):
        perm = order_rng.permutation(n)
        for start in range(0, n, config.batch_size):
            samples = [dataset.train[int(i)] for i in perm[start : start + config.batch_size]]
            items = [(s.modality_input, s.input_text, s.target_text) for s in samples]
            batch = model.batch(items, task.modality)
            dist, cache = model.forward(batch)
            loss_main = cross_entropy_seq(dist, batch.target_ids)
            grads = model.backward(cache, cross_entropy_grad(dist, batch.target_ids), want)

            parts = {"loss_p": 0.0, "loss_ins": 0.0, "aux": 0.0}
            if hooks.extra_losses is not None:
                ctx = StepCtx(
                    model=model,
                    task=task,
                    samples=samples,
                    batch=batch,
                    dist=dist,
                    cache=cache,
                    step=step,
                    want=want,
                )
                for name, value, egrads in hooks.extra_losses(ctx):
                    parts[name] += value
                    _merge_grads(grads, egrads)

            lr = opt.step(model.params, grads)
            if hooks.post_update is not None:
                hooks.post_update(model)

            total = loss_main + parts["loss_p"] + parts["loss_ins"] + parts["aux"]
            log.records.append(
                StepRecord(
                    task_index=task.index,
                    step=step,
                    lr=lr,
                    loss_main=loss_main,
                    loss_p=parts["loss_p"],
                    loss_ins=parts["loss_ins"],
                    aux=parts["aux"],
                    total=total,
                )
            )
            step += 1

    if hooks.end_of_task is not None:
        hooks.end_of_task(model)
    log.wall_time = time.perf_counter() - t0
    return model, log


# ---- pre-training of the frozen base ----


def pretrain_base(model: MLLM, texts: list[str], config: RunConfig) -> None:
    """Brief text-only next-token training of the backbone, then frozen.

    Adapters and projections are untouched, so the adapted model starts
    exactly at the pre-trained base.
    """
    if config.pretrain_steps == 0:
        return
    want = frozenset(k for k in model.params if k.startswith("lm."))
    opt = AdamW(want, model.params, config.pretrain_lr, 0.01, config.pretrain_steps)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0x9E7]))
    for _ in range(config.pretrain_steps):
        idx = rng.choice(len(texts), size=min(config.batch_size, len(texts)), replace=False)
        items = [(None, "", texts[int(i)]) for i in idx]
        batch = model.batch(items, None)
        dist, cache = model.forward(batch)
        grads = model.backward(cache, cross_entropy_grad(dist, batch.target_ids), want)
        opt.step(model.params, grads)


# ---- evaluation ----


def evaluate_task(model: MLLM, dataset: TaskDataset, descriptor: TaskDescriptor) -> float:
    """Test-split score: captioning entries 0..100, QA accuracy percent."""
    samples = dataset.test
    if descriptor.task_type is TaskType.CAPTIONING:
        preds = _generate_all(model, samples, descriptor.modality, CAPTION_MAX_LEN)
        candidates = {i: p for i, p in enumerate(preds)}
        references = {i: [s.target_text] for i, s in enumerate(samples)}
        _, corpus = cider(candidates, references)
        return corpus * 10.0
    preds = _generate_all(model, samples, descriptor.modality, QA_MAX_LEN)
    return qa_accuracy(preds, [s.target_text for s in samples])


def _generate_all(
    model: MLLM, samples, modality: Modality, max_len: int
) -> list[str]:
    out: list[str] = []
    for start in range(0, len(samples), EVAL_CHUNK):
        chunk = samples[start : start + EVAL_CHUNK]
        items = [(s.modality_input, s.input_text) for s in chunk]
        out.extend(model.generate_greedy(items, modality, max_len=max_len))
    return out


# ---- whole-order runner ----


def run_order(
    config: RunConfig,
    vocab: Vocabulary,
    datasets: dict[int, TaskDataset],
    out_dir: str | Path | None = None,
    backend_kind: BackendKind = BackendKind.GRAMMAR_ORACLE,
    save_checkpoints: bool = False,
    instruction_corpus: list[str] | None = None,
    progress: Callable[[str], None] | None = None,
) -> tuple[MLLM, ScoreMatrix, list[TrainLog]]:
    from .ikd import build_instruction_corpus
    from .model.mllm import save_checkpoint

    if instruction_corpus is None:
        instruction_corpus = build_instruction_corpus()
    model = MLLM.init(config.dims, vocab, config.seed)
    pretrain_base(model, instruction_corpus, config)
    base_snapshot = model.snapshot()
    if backend_kind is BackendKind.LM_PROMPTED:
        backend = QaGeneratorBackend(
            BackendKind.LM_PROMPTED, lm=MLLM(dict(base_snapshot), config.dims, vocab)
        )
    else:
        backend = QaGeneratorBackend(BackendKind.GRAMMAR_ORACLE)
    instruction_set = InstructionSet(tuple(instruction_corpus), seed=config.seed)
    fisher_store: list[FisherDiag] = []

    matrix = ScoreMatrix(
        task_types={t.index: t.task_type for t in config.task_order},
        dataset_ids={t.index: t.dataset_id for t in config.task_order},
    )
    state = LearnedState()
    logs: list[TrainLog] = []
    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)

    for task in config.task_order:
        state = update_learned_state(state, task, commit=False)
        old_snapshot = model.snapshot()
        hooks = build_hooks(
            config,
            task,
            old_snapshot,
            state,
            instruction_set,
            backend,
            fisher_store,
            model,
            dataset=datasets[task.index],
        )
        model, log = train_task(
            model, old_snapshot, task, datasets[task.index], state, config, hooks
        )
        logs.append(log)
        state = update_learned_state(state, task, commit=True)
        for done in config.task_order[: task.index]:
            score = evaluate_task(model, datasets[done.index], done)
            matrix.set(done.index, task.index, score)
        if progress is not None:
            progress(
                f"task {task.index}/{len(config.task_order)} {task.dataset_id}: "
                f"diag {matrix.get(task.index, task.index):.2f}"
            )
        if out_path is not None and save_checkpoints:
            save_checkpoint(model, out_path / f"checkpoint_task{task.index}.bin", task.index)

    if out_path is not None:
        (out_path / "score_matrix.json").write_text(
            matrix.to_canonical_json(), encoding="utf-8"
        )
        with open(out_path / "train_log.jsonl", "w", encoding="utf-8") as f:
            for log in logs:
                for rec in log.records:
                    f.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")
    return model, matrix, logs
