from .encoders import ENCODER_SEED, MAX_OBJECTS, N_SLOTS, RAW_DIM, encode, featurize
from .lm import (
    ATTN_PROJS,
    adapter_keys,
    effective_weight,
    init_adapter_params,
    init_lm_params,
    lm_backward,
    lm_forward,
)
from .mllm import (
    MLLM,
    Batch,
    ContextOverflowError,
    build_batch,
    load_checkpoint,
    params_fingerprint,
    save_checkpoint,
    vocab_hash,
)
from .seqdist import SequenceDistribution

__all__ = [
    "ATTN_PROJS",
    "Batch",
    "ContextOverflowError",
    "ENCODER_SEED",
    "MAX_OBJECTS",
    "MLLM",
    "N_SLOTS",
    "RAW_DIM",
    "SequenceDistribution",
    "adapter_keys",
    "build_batch",
    "effective_weight",
    "encode",
    "featurize",
    "init_adapter_params",
    "init_lm_params",
    "lm_backward",
    "lm_forward",
    "load_checkpoint",
    "params_fingerprint",
    "save_checkpoint",
    "vocab_hash",
]
