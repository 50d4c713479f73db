"""The full multimodal model: frozen encoders, per-modality projection MLPs,
and the adapter-tuned LM, plus batching, greedy decoding, and checkpoints.

Parameters live in one flat name->array dict. Name prefixes define the
frozen/trainable split:

  enc.*      frozen featurizer mixing matrices
  lm.*       backbone, frozen after pre-training
  adapter.*  low-rank attention adapters, trainable in every task
  proj.<m>.* projection MLP for modality m, trainable only in tasks of m
"""
from __future__ import annotations

import hashlib
import json
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import kernels as K
from ..core.config import ModelDims
from ..core.types import Modality
from ..core.vocab import Vocabulary
from . import encoders
from .lm import (
    adapter_keys,
    init_adapter_params,
    init_lm_params,
    lm_backward,
    lm_forward,
)
from .seqdist import SequenceDistribution

NEG = -1e30


class ContextOverflowError(ValueError):
    def __init__(self, needed: int, context: int):
        super().__init__(f"sequence needs {needed} positions, context is {context}")
        self.needed = needed
        self.context = context


@dataclass
class Batch:
    ids: np.ndarray  # (B, T) int64, right-padded with PAD
    lengths: np.ndarray  # (B,)
    bias: np.ndarray  # (B, T, T) additive attention mask
    slot_feats: np.ndarray | None  # (B, S, f) frozen features, None if text-only
    n_slots: int
    modality: Modality | None
    loss_pos: np.ndarray  # (B, Lt) positions whose logits are scored
    loss_mask: np.ndarray  # (B, Lt)
    target_ids: np.ndarray  # (B, Lt)

    @property
    def size(self) -> int:
        return self.ids.shape[0]


def _attention_bias(lengths: np.ndarray, t: int) -> np.ndarray:
    causal = np.triu(np.full((t, t), NEG), k=1)
    bias = np.repeat(causal[None, :, :], len(lengths), axis=0)
    for i, ln in enumerate(lengths):
        bias[i, :, ln:] = NEG
    return bias


def _pad_rows(rows: list[list[int]], pad: int) -> np.ndarray:
    t = max(len(r) for r in rows)
    out = np.full((len(rows), t), pad, dtype=np.int64)
    for i, r in enumerate(rows):
        out[i, : len(r)] = r
    return out


def build_batch(
    vocab: Vocabulary,
    dims: ModelDims,
    enc_params: dict[str, np.ndarray],
    items: list[tuple[object, str, str]],
    modality: Modality | None,
) -> Batch:
    """items: (scene, input_text, target_text); scene is None when text-only.

    Layout: [BOS][placeholder x S][input][SEP][target][EOS]; loss positions
    predict every target token plus EOS. Text-only layout: [BOS][target][EOS]
    with the whole text predicted (input_text must be "").
    """
    n_slots = encoders.N_SLOTS[modality] if modality is not None else 0
    ids_rows: list[list[int]] = []
    pos_rows: list[list[int]] = []
    tgt_rows: list[list[int]] = []
    feats = []
    for scene, input_text, target_text in items:
        if modality is None:
            if scene is not None:
                raise ValueError("text-only batches take no scene")
        elif not isinstance(scene, encoders.SCENE_TYPES[modality]):
            raise ValueError(f"scene does not match batch modality {modality.value!r}")
        t_ids = vocab.encode(input_text)
        y_ids = vocab.encode(target_text)
        if modality is None:
            if input_text:
                raise ValueError("text-only batches model the target only")
            row = [vocab.bos_id] + y_ids + [vocab.eos_id]
            start = 0
        else:
            ph = vocab.placeholder_id(modality)
            row = (
                [vocab.bos_id]
                + [ph] * n_slots
                + t_ids
                + [vocab.sep_id]
                + y_ids
                + [vocab.eos_id]
            )
            start = 1 + n_slots + len(t_ids)
            feats.append(encoders.encode(scene, modality, enc_params))
        if len(row) > dims.context_len:
            raise ContextOverflowError(len(row), dims.context_len)
        ids_rows.append(row)
        pos_rows.append(list(range(start, start + len(y_ids) + 1)))
        tgt_rows.append(y_ids + [vocab.eos_id])

    ids = _pad_rows(ids_rows, vocab.pad_id)
    lengths = np.array([len(r) for r in ids_rows], dtype=np.int64)
    loss_pos = _pad_rows(pos_rows, 0)
    target_ids = _pad_rows(tgt_rows, vocab.pad_id)
    loss_mask = np.zeros(loss_pos.shape, dtype=bool)
    for i, r in enumerate(pos_rows):
        loss_mask[i, : len(r)] = True
    return Batch(
        ids=ids,
        lengths=lengths,
        bias=_attention_bias(lengths, ids.shape[1]),
        slot_feats=np.stack(feats) if feats else None,
        n_slots=n_slots,
        modality=modality,
        loss_pos=loss_pos,
        loss_mask=loss_mask,
        target_ids=target_ids,
    )


def _proj_forward(
    params: dict[str, np.ndarray], modality: Modality, feats: np.ndarray
) -> tuple[np.ndarray, dict]:
    b, s, f = feats.shape
    pre = f"proj.{modality.value}"
    flat = feats.reshape(b * s, f)
    h1 = flat @ params[f"{pre}.w1"] + params[f"{pre}.b1"]
    hg = K.gelu_fwd(h1)
    out = hg @ params[f"{pre}.w2"] + params[f"{pre}.b2"]
    return out.reshape(b, s, -1), {"flat": flat, "h1": h1, "hg": hg}


def _proj_backward(
    params: dict[str, np.ndarray],
    modality: Modality,
    cache: dict,
    dout: np.ndarray,
    want: frozenset[str],
) -> dict[str, np.ndarray]:
    b, s, d = dout.shape
    pre = f"proj.{modality.value}"
    df = dout.reshape(b * s, d)
    grads = {}
    if f"{pre}.w2" in want:
        grads[f"{pre}.w2"] = cache["hg"].T @ df
    if f"{pre}.b2" in want:
        grads[f"{pre}.b2"] = df.sum(axis=0)
    dhg = df @ params[f"{pre}.w2"].T
    dh1 = K.gelu_bwd(cache["h1"], dhg)
    if f"{pre}.w1" in want:
        grads[f"{pre}.w1"] = cache["flat"].T @ dh1
    if f"{pre}.b1" in want:
        grads[f"{pre}.b1"] = dh1.sum(axis=0)
    return grads


class MLLM:
    def __init__(self, params: dict[str, np.ndarray], dims: ModelDims, vocab: Vocabulary):
        self.params = params
        self.dims = dims
        self.vocab = vocab

    @classmethod
    def init(cls, dims: ModelDims, vocab: Vocabulary, seed: int) -> "MLLM":
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0x1117]))
        params = init_lm_params(dims, len(vocab), rng)
        params.update(init_adapter_params(dims, rng))
        for mod in Modality:
            pre = f"proj.{mod.value}"
            params[f"{pre}.w1"] = rng.standard_normal(
                (dims.feature_dim, dims.proj_hidden)
            ) / np.sqrt(dims.feature_dim)
            params[f"{pre}.b1"] = np.zeros(dims.proj_hidden)
            params[f"{pre}.w2"] = rng.standard_normal(
                (dims.proj_hidden, dims.embed_dim)
            ) / np.sqrt(dims.proj_hidden)
            params[f"{pre}.b2"] = np.zeros(dims.embed_dim)
        params.update(encoders.encoder_params(dims.feature_dim))
        return cls(params, dims, vocab)

    # ---- parameter bookkeeping ----

    def adapter_param_keys(self) -> list[str]:
        return adapter_keys(self.dims)

    def projection_keys(self, modality: Modality) -> list[str]:
        pre = f"proj.{modality.value}"
        return [f"{pre}.w1", f"{pre}.b1", f"{pre}.w2", f"{pre}.b2"]

    def trainable_keys(self, modality: Modality) -> frozenset[str]:
        return frozenset(self.adapter_param_keys() + self.projection_keys(modality))

    def lm_component_keys(self) -> list[str]:
        """The fusable LM delta: every update to the LM lives in the adapters."""
        return self.adapter_param_keys()

    def snapshot(self) -> dict[str, np.ndarray]:
        out = {}
        for k, v in self.params.items():
            c = v.copy()
            c.flags.writeable = False
            out[k] = c
        return out

    # ---- forward / backward ----

    def batch(
        self, items: list[tuple[object, str, str]], modality: Modality | None
    ) -> Batch:
        return build_batch(self.vocab, self.dims, self.params, items, modality)

    def forward(
        self, batch: Batch, params: dict[str, np.ndarray] | None = None
    ) -> tuple[SequenceDistribution, dict]:
        p = self.params if params is None else params
        b, t = batch.ids.shape
        e = p["lm.tok_emb"][batch.ids] + p["lm.pos_emb"][:t]
        proj_cache = None
        if batch.slot_feats is not None:
            out, proj_cache = _proj_forward(p, batch.modality, batch.slot_feats)
            e = e.copy()
            e[:, 1 : 1 + batch.n_slots, :] += out
        logits, lm_cache = lm_forward(p, e, batch.bias, self.dims)
        probs = K.softmax_rows(logits)
        rows = np.arange(b)[:, None]
        dist = SequenceDistribution(
            probs=probs[rows, batch.loss_pos], mask=batch.loss_mask
        )
        cache = {
            "lm": lm_cache,
            "proj": proj_cache,
            "batch": batch,
            "probs_full": probs,
            "params": p,
        }
        return dist, cache

    def backward(
        self, cache: dict, dtarget_logits: np.ndarray, want: frozenset[str]
    ) -> dict[str, np.ndarray]:
        """dtarget_logits: (B, Lt, V) gradient at the scored positions' logits."""
        batch: Batch = cache["batch"]
        p = cache["params"]
        b, t = batch.ids.shape
        v = dtarget_logits.shape[-1]
        dlogits = np.zeros((b, t, v))
        rows = np.arange(b)[:, None]
        np.add.at(dlogits, (rows, batch.loss_pos), dtarget_logits * batch.loss_mask[..., None])
        grads, dx0 = lm_backward(p, cache["lm"], dlogits, self.dims, want)
        if "lm.pos_emb" in want:
            g = np.zeros_like(p["lm.pos_emb"])
            g[:t] = dx0.sum(axis=0)
            grads["lm.pos_emb"] = g
        if "lm.tok_emb" in want:
            g = np.zeros_like(p["lm.tok_emb"])
            np.add.at(g, batch.ids.reshape(-1), dx0.reshape(b * t, -1))
            grads["lm.tok_emb"] = g
        if batch.slot_feats is not None and cache["proj"] is not None:
            pre = f"proj.{batch.modality.value}"
            if any(k.startswith(pre) for k in want):
                dslots = dx0[:, 1 : 1 + batch.n_slots, :]
                grads.update(
                    _proj_backward(p, batch.modality, cache["proj"], dslots, want)
                )
        return grads

    # ---- decoding ----

    def generate_greedy(
        self,
        items: list[tuple[object, str]],
        modality: Modality | None,
        max_len: int = 20,
        params: dict[str, np.ndarray] | None = None,
    ) -> list[str]:
        """items: (scene, input_text). Greedy decode until EOS or max_len."""
        p = self.params if params is None else params
        n_slots = encoders.N_SLOTS[modality] if modality is not None else 0
        prefix_rows = []
        feats = []
        for scene, input_text in items:
            t_ids = self.vocab.encode(input_text)
            if modality is None:
                prefix_rows.append([self.vocab.bos_id] + t_ids + [self.vocab.sep_id])
            else:
                prefix_rows.append(
                    [self.vocab.bos_id]
                    + [self.vocab.placeholder_id(modality)] * n_slots
                    + t_ids
                    + [self.vocab.sep_id]
                )
                feats.append(encoders.encode(scene, modality, p))
        if max_len == 0:
            return ["" for _ in items]
        b = len(prefix_rows)
        t_max = max(len(r) for r in prefix_rows) + max_len
        if t_max > self.dims.context_len:
            raise ContextOverflowError(t_max, self.dims.context_len)
        ids = np.full((b, t_max), self.vocab.pad_id, dtype=np.int64)
        lengths = np.zeros(b, dtype=np.int64)
        for i, r in enumerate(prefix_rows):
            ids[i, : len(r)] = r
            lengths[i] = len(r)
        slot_feats = np.stack(feats) if feats else None
        done = np.zeros(b, dtype=bool)
        generated: list[list[int]] = [[] for _ in range(b)]
        for _ in range(max_len):
            e = p["lm.tok_emb"][ids] + p["lm.pos_emb"][:t_max]
            if slot_feats is not None:
                out, _ = _proj_forward(p, modality, slot_feats)
                e = e.copy()
                e[:, 1 : 1 + n_slots, :] += out
            bias = _attention_bias(lengths, t_max)
            logits, _ = lm_forward(p, e, bias, self.dims)
            nxt = np.argmax(logits[np.arange(b), lengths - 1], axis=-1)
            for i in range(b):
                if done[i]:
                    continue
                if int(nxt[i]) == self.vocab.eos_id:
                    done[i] = True
                    continue
                generated[i].append(int(nxt[i]))
                ids[i, lengths[i]] = int(nxt[i])
                lengths[i] += 1
            if done.all():
                break
        return [self.vocab.decode(g) for g in generated]


# ---- hashing and checkpoints ----


def params_fingerprint(params: dict[str, np.ndarray], keys=None) -> str:
    h = hashlib.sha256()
    for name in sorted(keys if keys is not None else params):
        h.update(name.encode())
        h.update(np.ascontiguousarray(params[name]).tobytes())
    return h.hexdigest()


def vocab_hash(vocab: Vocabulary) -> int:
    return zlib.crc32("\n".join(vocab.token_of(i) for i in range(len(vocab))).encode())


def save_checkpoint(model: MLLM, path: str | Path, task_index: int = 0) -> None:
    names = sorted(model.params)
    header = {
        "dims": {
            "embed_dim": model.dims.embed_dim,
            "n_layers": model.dims.n_layers,
            "n_heads": model.dims.n_heads,
            "context_len": model.dims.context_len,
            "adapter_rank": model.dims.adapter_rank,
            "feature_dim": model.dims.feature_dim,
            "proj_hidden": model.dims.proj_hidden,
        },
        "vocab_hash": vocab_hash(model.vocab),
        "task_index": task_index,
        "tensors": [
            {"name": n, "shape": list(model.params[n].shape), "dtype": "float64"}
            for n in names
        ],
    }
    blob = json.dumps(header, sort_keys=True).encode() + b"\n"
    parts = [blob]
    for n in names:
        parts.append(np.ascontiguousarray(model.params[n], dtype=np.float64).tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_checkpoint(path: str | Path, vocab: Vocabulary) -> tuple[MLLM, int]:
    raw = Path(path).read_bytes()
    nl = raw.index(b"\n")
    header = json.loads(raw[:nl].decode())
    if header["vocab_hash"] != vocab_hash(vocab):
        raise ValueError("checkpoint vocabulary does not match")
    dims = ModelDims(**header["dims"])
    params = {}
    off = nl + 1
    for spec in header["tensors"]:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        arr = np.frombuffer(raw[off : off + nbytes], dtype=np.float64).reshape(shape)
        params[spec["name"]] = arr.copy()
        off += nbytes
    if off != len(raw):
        raise ValueError("trailing bytes in checkpoint")
    return MLLM(params, dims, vocab), int(header["task_index"])
