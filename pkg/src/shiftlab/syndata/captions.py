"""Template caption grammar. Every object attribute appears in the caption,
so question answering is well-posed from the caption text alone."""
from __future__ import annotations

from ..core.types import Modality
from .scenes import AudScene, ImgScene, Scene, VidScene

CAPTION_INSTRUCTION = {
    Modality.IMG: "describe the image",
    Modality.AUD: "describe the audio",
    Modality.VID: "describe the video",
}


def caption_instruction(modality: Modality) -> str:
    return CAPTION_INSTRUCTION[modality]


def _sorted_objects(scene: ImgScene):
    return sorted(scene.objects, key=lambda o: (o.row, o.col))


def render_caption(scene: Scene) -> str:
    if isinstance(scene, ImgScene):
        objs = _sorted_objects(scene)
        parts = [f"a {objs[0].color} {objs[0].shape}"]
        for prev, cur in zip(objs, objs[1:]):
            rel = "above" if prev.row < cur.row else "beside"
            parts.append(f"{rel} a {cur.color} {cur.shape}")
        return " ".join(parts)
    if isinstance(scene, AudScene):
        return " then ".join(f"a {loud} {event}" for event, loud in scene.events)
    if isinstance(scene, VidScene):
        objs = sorted(scene.objects, key=lambda o: (o.row, o.col))
        return " and ".join(
            f"a {o.color} {o.shape} moving {o.direction}" for o in objs
        )
    raise TypeError(f"not a scene: {type(scene).__name__}")
