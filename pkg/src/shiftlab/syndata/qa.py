"""Question grammar and the ground-truth oracle.

``enumerate_qa`` lists every well-posed question for a scene; ``render_qa``
picks one deterministically. ``answer_question`` re-derives the answer from
the scene record alone and is the referee for generated question/answer
pairs: it returns None when a question is unparseable or has no unique
answer in the scene.
"""
from __future__ import annotations

import zlib

from ..core.text import normalize
from .scenes import AudScene, ImgScene, Scene, VidScene, scene_key


def enumerate_qa(scene: Scene) -> list[tuple[str, str]]:
    pairs: list[tuple[str, str]] = []
    if isinstance(scene, ImgScene):
        for o in scene.objects:
            pairs.append((f"what color is the {o.shape} ?", o.color))
        for o in scene.objects:
            pairs.append((f"what shape is the {o.color} one ?", o.shape))
        objs = sorted(scene.objects, key=lambda o: (o.row, o.col))
        for prev, cur in zip(objs, objs[1:]):
            if prev.row < cur.row:
                pairs.append(
                    (
                        f"what is above a {cur.color} {cur.shape} ?",
                        f"{prev.color} {prev.shape}",
                    )
                )
    elif isinstance(scene, AudScene):
        for event, loud in scene.events:
            pairs.append((f"how loud is the {event} ?", loud))
        for (event, _), (nxt, _) in zip(scene.events, scene.events[1:]):
            pairs.append((f"what comes after the {event} ?", nxt))
        pairs.append(("what is the first sound ?", scene.events[0][0]))
    elif isinstance(scene, VidScene):
        for o in scene.objects:
            pairs.append(
                (f"which way is the {o.color} {o.shape} moving ?", o.direction)
            )
        for o in scene.objects:
            pairs.append((f"what color is the {o.shape} ?", o.color))
        for o in scene.objects:
            pairs.append((f"what is moving {o.direction} ?", f"{o.color} {o.shape}"))
    else:
        raise TypeError(f"not a scene: {type(scene).__name__}")
    return pairs


def render_qa(scene: Scene) -> tuple[str, str]:
    """One question per scene, chosen by a stable hash of the scene identity."""
    pairs = enumerate_qa(scene)
    idx = zlib.crc32(scene_key(scene).encode()) % len(pairs)
    return pairs[idx]


def answer_question(scene: Scene, question: str) -> str | None:
    toks = normalize(question).split()
    if toks and toks[-1] == "?":
        toks = toks[:-1]
    if not toks:
        return None

    if isinstance(scene, (ImgScene, VidScene)):
        objects = scene.objects
        # "what color is the <shape>"
        if toks[:4] == ["what", "color", "is", "the"] and len(toks) == 5:
            hits = [o for o in objects if o.shape == toks[4]]
            return hits[0].color if len(hits) == 1 else None
        if isinstance(scene, ImgScene):
            # "what shape is the <color> one"
            if (
                toks[:4] == ["what", "shape", "is", "the"]
                and len(toks) == 6
                and toks[5] == "one"
            ):
                hits = [o for o in objects if o.color == toks[4]]
                return hits[0].shape if len(hits) == 1 else None
            # "what is above a <color> <shape>"
            if toks[:4] == ["what", "is", "above", "a"] and len(toks) == 6:
                objs = sorted(objects, key=lambda o: (o.row, o.col))
                for prev, cur in zip(objs, objs[1:]):
                    if (
                        prev.row < cur.row
                        and cur.color == toks[4]
                        and cur.shape == toks[5]
                    ):
                        return f"{prev.color} {prev.shape}"
                return None
        else:
            # "which way is the <color> <shape> moving"
            if (
                toks[:4] == ["which", "way", "is", "the"]
                and len(toks) == 7
                and toks[6] == "moving"
            ):
                hits = [
                    o for o in objects if o.color == toks[4] and o.shape == toks[5]
                ]
                return hits[0].direction if len(hits) == 1 else None
            # "what is moving <direction>"
            if toks[:3] == ["what", "is", "moving"] and len(toks) == 4:
                hits = [o for o in objects if o.direction == toks[3]]
                return f"{hits[0].color} {hits[0].shape}" if len(hits) == 1 else None
        return None

    if isinstance(scene, AudScene):
        if toks[:4] == ["how", "loud", "is", "the"] and len(toks) == 5:
            hits = [l for e, l in scene.events if e == toks[4]]
            return hits[0] if len(hits) == 1 else None
        if toks[:4] == ["what", "comes", "after", "the"] and len(toks) == 5:
            for (event, _), (nxt, _) in zip(scene.events, scene.events[1:]):
                if event == toks[4]:
                    return nxt
            return None
        if toks == ["what", "is", "the", "first", "sound"]:
            return scene.events[0][0]
        return None

    raise TypeError(f"not a scene: {type(scene).__name__}")
