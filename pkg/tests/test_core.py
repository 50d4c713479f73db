import json
from dataclasses import replace

import pytest

from shiftlab.core.config import ModelDims, RunConfig, TaskOverride, default_task_order
from shiftlab.core.config_io import (
    config_from_dict,
    config_to_dict,
    load_config,
    to_canonical_json,
)
from shiftlab.core.text import normalize, words
from shiftlab.core.types import (
    FusionMode,
    LearnedState,
    Method,
    Modality,
    PseudoSample,
    Sample,
    TaskDescriptor,
    TaskType,
    update_learned_state,
)
from shiftlab.core.vocab import (
    SPECIALS,
    OutOfVocabularyError,
    Vocabulary,
    build_vocabulary,
)


def _task(index=1, modality=Modality.IMG, task_type=TaskType.CAPTIONING):
    return TaskDescriptor(
        index=index,
        modality=modality,
        task_type=task_type,
        dataset_id="d",
        n_samples=4,
    )


class TestTypes:
    def test_task_descriptor_validation(self):
        with pytest.raises(ValueError):
            _task(index=0)
        with pytest.raises(ValueError):
            TaskDescriptor(
                index=1,
                modality=Modality.IMG,
                task_type=TaskType.QA,
                dataset_id="d",
                n_samples=0,
            )

    def test_pseudo_sample_validation(self):
        with pytest.raises(ValueError):
            PseudoSample(None, "q", "", TaskType.CAPTIONING)
        with pytest.raises(ValueError):
            PseudoSample(None, "q ?", "one two three", TaskType.QA)
        ok = PseudoSample(None, "q ?", "red square", TaskType.QA)
        assert ok.pseudo_target_text == "red square"

    def test_learned_state_start_then_commit(self):
        state = LearnedState()
        t1 = _task(1, Modality.IMG, TaskType.CAPTIONING)
        started = update_learned_state(state, t1, commit=False)
        assert Modality.IMG not in started.learned_modalities
        assert started.types_for(Modality.IMG) == frozenset()
        done = update_learned_state(started, t1, commit=True)
        assert Modality.IMG in done.learned_modalities
        assert done.types_for(Modality.IMG) == {TaskType.CAPTIONING}

    def test_learned_state_monotone(self):
        state = LearnedState()
        tasks = [
            _task(1, Modality.IMG, TaskType.CAPTIONING),
            _task(2, Modality.VID, TaskType.CAPTIONING),
            _task(3, Modality.VID, TaskType.QA),
        ]
        seen = [state]
        for t in tasks:
            state = update_learned_state(state, t, commit=False)
            seen.append(state)
            state = update_learned_state(state, t, commit=True)
            seen.append(state)
        for earlier, later in zip(seen, seen[1:]):
            assert later.covers(earlier)
        assert state.types_for(Modality.VID) == {TaskType.CAPTIONING, TaskType.QA}

    def test_commit_idempotent(self):
        t = _task(1)
        s1 = update_learned_state(LearnedState(), t, commit=True)
        s2 = update_learned_state(s1, t, commit=True)
        assert s1 == s2


class TestText:
    def test_lowercase_and_punctuation(self):
        assert normalize("A Red Circle.") == "a red circle"
        assert normalize("what color?") == "what color ?"
        assert normalize("  a   b  ") == "a b"

    def test_question_mark_is_a_token(self):
        assert words("is it red?") == ["is", "it", "red", "?"]

    def test_strips_other_symbols(self):
        assert normalize("a, b; c!") == "a b c"


class TestVocabulary:
    def test_specials_lowest_ids(self):
        v = build_vocabulary(["a red circle"])
        for i, tok in enumerate(SPECIALS):
            assert v.id_of(tok) == i

    def test_build_first_appearance_order(self):
        v = build_vocabulary(["b a", "a c"])
        assert v.id_of("b") < v.id_of("a") < v.id_of("c")

    def test_size_example(self):
        v = build_vocabulary(["a red circle. a blue square?"])
        # 7 specials + a, red, circle, blue, square, ?
        assert len(v) == len(SPECIALS) + 6

    def test_empty_corpus(self):
        with pytest.raises(ValueError, match="empty corpus"):
            build_vocabulary([])

    def test_oov_names_token(self):
        v = build_vocabulary(["a red circle"])
        with pytest.raises(OutOfVocabularyError) as e:
            v.encode("a green circle")
        assert "green" in str(e.value)

    def test_encode_decode(self):
        v = build_vocabulary(["a red circle"])
        ids = v.encode("A RED circle.")
        assert v.decode(ids) == "a red circle"

    def test_decode_drops_specials(self):
        v = build_vocabulary(["a red circle"])
        ids = [v.bos_id] + v.encode("red") + [v.eos_id, v.pad_id]
        assert v.decode(ids) == "red"

    def test_save_load_round_trip(self, tmp_path):
        v = build_vocabulary(["a red circle", "what is ?"])
        p = tmp_path / "vocab.txt"
        v.save(p)
        assert Vocabulary.load(p) == v

    def test_specials_must_come_first(self):
        with pytest.raises(ValueError):
            Vocabulary(["a"] + list(SPECIALS))


class TestConfig:
    def test_defaults_valid(self):
        cfg = RunConfig(task_order=default_task_order())
        assert cfg.method is Method.MOINCL
        assert cfg.fusion_mode is FusionMode.PER_STEP
        assert cfg.alpha == 0.999

    def test_task_order_indices_contiguous(self):
        bad = (
            _task(1),
            _task(3),
        )
        with pytest.raises(ValueError):
            RunConfig(task_order=bad)

    def test_range_validation(self):
        order = default_task_order()
        with pytest.raises(ValueError):
            RunConfig(task_order=order, alpha=1.5)
        with pytest.raises(ValueError):
            RunConfig(task_order=order, learning_rate=-1.0)
        with pytest.raises(ValueError):
            RunConfig(task_order=order, batch_size=0)

    def test_per_task_overrides(self):
        order = default_task_order()
        cfg = RunConfig(
            task_order=order,
            lambda_p=1.0,
            overrides={3: TaskOverride(lambda_p=0.25)},
        )
        assert cfg.lambda_p_for(3) == 0.25
        assert cfg.lambda_p_for(2) == 1.0

    def test_with_method_fusion_coupling(self):
        cfg = RunConfig(task_order=default_task_order())
        assert cfg.with_method(Method.FINETUNE).fusion_mode is FusionMode.OFF
        assert cfg.with_method(Method.LWF).fusion_mode is FusionMode.OFF
        assert cfg.with_method(Method.EWC).fusion_mode is FusionMode.OFF
        ewf = cfg.with_method(Method.EWF)
        assert ewf.fusion_mode is FusionMode.END_OF_TASK
        assert ewf.alpha == 0.5

    def test_dims_validation(self):
        with pytest.raises(ValueError):
            ModelDims(embed_dim=30, n_heads=4)  # not divisible


class TestConfigIO:
    def test_round_trip_identity(self):
        cfg = RunConfig(
            task_order=default_task_order(),
            overrides={2: TaskOverride(alpha=0.9)},
        )
        assert config_from_dict(config_to_dict(cfg)) == cfg

    def test_canonical_json_byte_stable(self):
        cfg = RunConfig(task_order=default_task_order())
        a = to_canonical_json(cfg)
        b = to_canonical_json(config_from_dict(json.loads(a)))
        assert a == b
        assert a.endswith("\n")

    def test_unknown_key_rejected(self):
        cfg = RunConfig(task_order=default_task_order())
        d = config_to_dict(cfg)
        d["typo_field"] = 1
        with pytest.raises(ValueError, match="typo_field"):
            config_from_dict(d)

    def test_load_yaml_and_json(self, tmp_path):
        cfg = replace(RunConfig(task_order=default_task_order()), seed=7)
        j = tmp_path / "c.json"
        j.write_text(to_canonical_json(cfg))
        assert load_config(j) == cfg
        import yaml

        y = tmp_path / "c.yaml"
        y.write_text(yaml.safe_dump(config_to_dict(cfg)))
        assert load_config(y) == cfg
