"""Pseudo target generation for learned task types of the current modality.

Two generator backends produce question/answer pairs from a caption:

* GRAMMAR_ORACLE reads the underlying scene record and is exact; it is the
  default for training and tests at this scale.
* LM_PROMPTED runs a three-round prompting pipeline against the frozen
  pre-trained LM: round 1 extracts a short answer from the caption, round 2
  writes a question for that answer, round 3 re-answers the question from
  the caption. The round prompts are fixed templates.

Pseudo captioning needs no generation: the input text is a fixed
"describe the <modality>" instruction and the target is the scene's caption.
"""
from __future__ import annotations

import json
import logging
import zlib
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .core.text import normalize, words
from .core.types import LearnedState, Modality, PseudoSample, Sample, TaskDescriptor, TaskType
from .model.mllm import MLLM
from .syndata.captions import CAPTION_INSTRUCTION, render_caption
from .syndata.qa import answer_question, enumerate_qa
from .syndata.scenes import Scene, scene_key

log = logging.getLogger(__name__)

ROUND1_TEMPLATE = (
    "Given the {modality} context: '{caption}', generate a potential short "
    "answer from it. Provide just one or two words. The answer words should "
    "be strictly selected from the context. Provide only the answer, nothing "
    "else. Answer:"
)
ROUND2_TEMPLATE = (
    "Given the {modality} context: '{caption}' and the answer: '{answer}', "
    "generate a question for the answer that can be inferred from the "
    "context. Provide only one question and nothing else. Question:"
)
ROUND3_TEMPLATE = (
    "Answer the question using the given context. The answer should be only "
    "one or two words. Context: '{caption}'. Question: '{question}'. Answer:"
)

MODALITY_WORD = {Modality.IMG: "image", Modality.AUD: "audio", Modality.VID: "video"}


class BackendKind(str, Enum):
    LM_PROMPTED = "lm_prompted"
    GRAMMAR_ORACLE = "grammar_oracle"


@dataclass(frozen=True)
class QaGeneratorBackend:
    kind: BackendKind
    lm: MLLM | None = None  # frozen pre-trained weights; required for LM_PROMPTED

    def __post_init__(self) -> None:
        if self.kind is BackendKind.LM_PROMPTED and self.lm is None:
            raise ValueError("LM_PROMPTED backend needs the frozen LM handle")


def pseudo_caption_instruction(modality: Modality) -> str:
    try:
        return CAPTION_INSTRUCTION[modality]
    except (KeyError, TypeError):
        raise ValueError(f"unknown modality: {modality!r}") from None


def _pick(caption: str, seed: int, n: int) -> int:
    return zlib.crc32(f"{seed}:{caption}".encode()) % n


def _lm_generate(lm: MLLM, prompt: str, max_len: int) -> str:
    return lm.generate_greedy([(None, prompt)], None, max_len=max_len)[0]


def three_round_qa(
    caption: str,
    modality: Modality,
    backend: QaGeneratorBackend,
    scene: Scene | None = None,
    seed: int = 0,
) -> tuple[str, str]:
    """Returns (question, answer) for a caption of the given modality."""
    if not normalize(caption):
        raise ValueError("empty caption")

    if backend.kind is BackendKind.GRAMMAR_ORACLE:
        if scene is None:
            raise ValueError("grammar oracle backend needs the scene record")
        pairs = enumerate_qa(scene)
        question, answer = pairs[_pick(caption, seed, len(pairs))]
        derived = answer_question(scene, question)
        if derived != answer:
            raise AssertionError(f"oracle disagreed with itself on {question!r}")
        return question, answer

    lm = backend.lm
    mod_word = MODALITY_WORD[modality]
    r1 = _lm_generate(
        lm,
        ROUND1_TEMPLATE.format(modality=mod_word, caption=caption),
        max_len=4,
    )
    answer_bar = " ".join(words(r1)[:2])
    if not answer_bar:
        caption_words = words(caption)
        answer_bar = caption_words[-1]
        log.warning("round 1 produced no answer; using caption word %r", answer_bar)
    r2 = _lm_generate(
        lm,
        ROUND2_TEMPLATE.format(modality=mod_word, caption=caption, answer=answer_bar),
        max_len=12,
    )
    question_toks = [w for w in words(r2) if w != "?"]
    if not question_toks:
        question_toks = ["what", "is", "the", mod_word]
        log.warning("round 2 produced no question; using generic fallback")
    question = " ".join(question_toks) + " ?"
    r3 = _lm_generate(
        lm,
        ROUND3_TEMPLATE.format(caption=caption, question=question),
        max_len=4,
    )
    answer = " ".join(words(r3)[:2])
    if not answer:
        log.warning("round 3 produced no answer; falling back to round 1 answer")
        answer = answer_bar
    return question, answer


def generate_pseudo_batch(
    samples: list[Sample],
    learned_state: LearnedState,
    task: TaskDescriptor,
    backend: QaGeneratorBackend,
    seed: int = 0,
) -> list[PseudoSample]:
    """One pseudo sample per (sample, learned type != current type).

    Empty unless the current modality was already learned with some other
    task type; unseen modalities deliberately get nothing.
    """
    if task.modality not in learned_state.learned_modalities:
        return []
    types = learned_state.types_for(task.modality) - {task.task_type}
    if not types:
        return []
    out: list[PseudoSample] = []
    for sample in samples:
        scene = sample.modality_input
        for p in sorted(types, key=lambda t: t.value):
            if p is TaskType.CAPTIONING:
                out.append(
                    PseudoSample(
                        modality_input=scene,
                        pseudo_input_text=pseudo_caption_instruction(task.modality),
                        pseudo_target_text=render_caption(scene),
                        source_task_type=p,
                    )
                )
            else:
                caption = (
                    sample.target_text
                    if task.task_type is TaskType.CAPTIONING
                    else None
                )
                if caption is None:
                    caption = render_caption(scene)
                question, answer = three_round_qa(
                    caption, task.modality, backend, scene=scene, seed=seed
                )
                out.append(
                    PseudoSample(
                        modality_input=scene,
                        pseudo_input_text=question,
                        pseudo_target_text=" ".join(words(answer)[:2]),
                        source_task_type=p,
                    )
                )
    return out


def dump_pseudo_audit(
    pseudo: list[PseudoSample],
    backend_kind: BackendKind,
    path: str | Path,
) -> None:
    """Line-delimited audit record of generated pseudo pairs for one task."""
    lines = []
    for ps in pseudo:
        lines.append(
            json.dumps(
                {
                    "backend": backend_kind.value,
                    "pseudo_input_text": ps.pseudo_input_text,
                    "pseudo_target_text": ps.pseudo_target_text,
                    "source_task_type": ps.source_task_type.value,
                    "caption": render_caption(ps.modality_input),
                    "scene": scene_key(ps.modality_input),
                },
                sort_keys=True,
            )
        )
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
