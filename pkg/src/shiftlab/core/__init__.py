from .config import ModelDims, RunConfig, TaskOverride, default_task_order
from .config_io import (
    config_from_dict,
    config_to_dict,
    load_config,
    save_canonical,
    to_canonical_json,
)
from .text import normalize, words
from .types import (
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
from .vocab import (
    BOS,
    EOS,
    PAD,
    PLACEHOLDER,
    SEP,
    SPECIALS,
    OutOfVocabularyError,
    Vocabulary,
    build_vocabulary,
)

__all__ = [
    "BOS",
    "EOS",
    "PAD",
    "PLACEHOLDER",
    "SEP",
    "SPECIALS",
    "FusionMode",
    "LearnedState",
    "Method",
    "Modality",
    "ModelDims",
    "OutOfVocabularyError",
    "PseudoSample",
    "RunConfig",
    "Sample",
    "TaskDescriptor",
    "TaskOverride",
    "TaskType",
    "Vocabulary",
    "build_vocabulary",
    "config_from_dict",
    "config_to_dict",
    "default_task_order",
    "load_config",
    "normalize",
    "save_canonical",
    "to_canonical_json",
    "update_learned_state",
    "words",
]
