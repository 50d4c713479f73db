"""Frozen deterministic featurizers, one per modality.

A scene is rendered to per-slot one-hot attribute vectors, then mixed by a
fixed random matrix into a common feature width. The mixing weights are
seeded by a package constant, not the run seed, so features are identical
across runs and never receive gradient.
"""
from __future__ import annotations

import numpy as np

from ..core.types import Modality
from ..syndata.scenes import (
    COLORS,
    DIRECTIONS,
    EVENTS,
    GRID,
    LOUDNESS,
    N_FRAMES,
    SHAPES,
    AudScene,
    ImgScene,
    Scene,
    VidScene,
)

ENCODER_SEED = 0xFEA7

# per-slot raw one-hot widths
_IMG_RAW = len(COLORS) + len(SHAPES) + GRID + GRID + 1  # +1 presence bit
_AUD_RAW = len(EVENTS) + len(LOUDNESS) + 4 + 1
_VID_RAW = _IMG_RAW + len(DIRECTIONS)

RAW_DIM = {Modality.IMG: _IMG_RAW, Modality.AUD: _AUD_RAW, Modality.VID: _VID_RAW}

MAX_OBJECTS = 3
N_SLOTS = {
    Modality.IMG: MAX_OBJECTS,
    Modality.AUD: 4,
    Modality.VID: N_FRAMES * MAX_OBJECTS,
}

SCENE_TYPES = {Modality.IMG: ImgScene, Modality.AUD: AudScene, Modality.VID: VidScene}


def encoder_params(feature_dim: int) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(np.random.SeedSequence(ENCODER_SEED))
    params = {}
    for mod in Modality:
        raw = RAW_DIM[mod]
        params[f"enc.{mod.value}.w"] = rng.standard_normal((raw, feature_dim)) / np.sqrt(
            raw
        )
    return params


def _img_slot(color: str, shape: str, row: int, col: int) -> np.ndarray:
    v = np.zeros(_IMG_RAW)
    v[COLORS.index(color)] = 1.0
    v[len(COLORS) + SHAPES.index(shape)] = 1.0
    v[len(COLORS) + len(SHAPES) + row] = 1.0
    v[len(COLORS) + len(SHAPES) + GRID + col] = 1.0
    v[-1] = 1.0
    return v


def featurize(scene: Scene) -> np.ndarray:
    """Scene -> (n_slots, raw_dim) one-hot block. Empty slots stay zero."""
    if isinstance(scene, ImgScene):
        out = np.zeros((N_SLOTS[Modality.IMG], _IMG_RAW))
        for i, o in enumerate(scene.objects):
            out[i] = _img_slot(o.color, o.shape, o.row, o.col)
        return out
    if isinstance(scene, AudScene):
        out = np.zeros((N_SLOTS[Modality.AUD], _AUD_RAW))
        for i, (event, loud) in enumerate(scene.events):
            v = out[i]
            v[EVENTS.index(event)] = 1.0
            v[len(EVENTS) + LOUDNESS.index(loud)] = 1.0
            v[len(EVENTS) + len(LOUDNESS) + i] = 1.0
            v[-1] = 1.0
        return out
    if isinstance(scene, VidScene):
        # frame-major slots: frame 0 objects, frame 1 objects, ...
        out = np.zeros((N_SLOTS[Modality.VID], _VID_RAW))
        for f, frame in enumerate(scene.frames()):
            for i, o in enumerate(frame.objects):
                base = _img_slot(o.color, o.shape, o.row, o.col)
                v = out[f * MAX_OBJECTS + i]
                v[:_IMG_RAW] = base
                direction = scene.objects[i].direction
                v[_IMG_RAW + DIRECTIONS.index(direction)] = 1.0
        return out
    raise TypeError(f"not a scene: {type(scene).__name__}")


def encode(scene: Scene, modality: Modality, params: dict[str, np.ndarray]) -> np.ndarray:
    """(n_slots, feature_dim) frozen features for one scene."""
    key = f"enc.{modality.value}.w"
    if key not in params:
        raise KeyError(f"no encoder registered for modality {modality.value!r}")
    return featurize(scene) @ params[key]
