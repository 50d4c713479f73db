from .captions import CAPTION_INSTRUCTION, caption_instruction, render_caption
from .datasets import (
    TaskDataset,
    dataset_rng,
    generate_task_dataset,
    load_dataset,
    save_dataset,
)
from .qa import answer_question, enumerate_qa, render_qa
from .scenes import (
    COLORS,
    DIRECTIONS,
    EVENTS,
    GRID,
    LOUDNESS,
    N_FRAMES,
    SHAPES,
    AudScene,
    ImgObject,
    ImgScene,
    Scene,
    VidObject,
    VidScene,
    generate_scene,
    scene_from_dict,
    scene_key,
)

__all__ = [
    "AudScene",
    "CAPTION_INSTRUCTION",
    "COLORS",
    "DIRECTIONS",
    "EVENTS",
    "GRID",
    "ImgObject",
    "ImgScene",
    "LOUDNESS",
    "N_FRAMES",
    "SHAPES",
    "Scene",
    "TaskDataset",
    "VidObject",
    "VidScene",
    "answer_question",
    "caption_instruction",
    "dataset_rng",
    "enumerate_qa",
    "generate_scene",
    "generate_task_dataset",
    "load_dataset",
    "render_caption",
    "render_qa",
    "save_dataset",
    "scene_from_dict",
    "scene_key",
]
