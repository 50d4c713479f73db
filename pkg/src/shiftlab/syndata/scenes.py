"""Synthetic micro-world scenes for three modalities.

Attribute sets are small and closed. Within a scene, colors, shapes, and
cells are pairwise distinct, which is what makes every attribute question
single-answer; video scenes additionally give each object a distinct
motion direction and audio scenes play each event exactly once.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..core.types import Modality

COLORS = ("red", "blue", "green", "yellow")
SHAPES = ("circle", "square", "triangle", "star")
EVENTS = ("bark", "horn", "bell", "splash")
LOUDNESS = ("soft", "loud")
DIRECTIONS = ("left", "right", "up", "down")

GRID = 4
N_FRAMES = 4

# (d_row, d_col) per step of motion
_DELTA = {"left": (0, -1), "right": (0, 1), "up": (-1, 0), "down": (1, 0)}


@dataclass(frozen=True)
class ImgObject:
    color: str
    shape: str
    row: int
    col: int


@dataclass(frozen=True)
class ImgScene:
    objects: tuple[ImgObject, ...]

    def to_dict(self) -> dict:
        return {
            "kind": "img",
            "objects": [
                {"color": o.color, "shape": o.shape, "row": o.row, "col": o.col}
                for o in self.objects
            ],
        }


@dataclass(frozen=True)
class AudScene:
    events: tuple[tuple[str, str], ...]  # (event, loudness), played in order

    def to_dict(self) -> dict:
        return {
            "kind": "aud",
            "events": [{"event": e, "loudness": l} for e, l in self.events],
        }


@dataclass(frozen=True)
class VidObject:
    color: str
    shape: str
    row: int  # position at frame 0
    col: int
    direction: str

    def position(self, frame: int) -> tuple[int, int]:
        dr, dc = _DELTA[self.direction]
        return self.row + frame * dr, self.col + frame * dc


@dataclass(frozen=True)
class VidScene:
    objects: tuple[VidObject, ...]

    def frames(self) -> list[ImgScene]:
        out = []
        for f in range(N_FRAMES):
            objs = tuple(
                ImgObject(o.color, o.shape, *o.position(f)) for o in self.objects
            )
            out.append(ImgScene(objs))
        return out

    def to_dict(self) -> dict:
        return {
            "kind": "vid",
            "objects": [
                {
                    "color": o.color,
                    "shape": o.shape,
                    "row": o.row,
                    "col": o.col,
                    "direction": o.direction,
                }
                for o in self.objects
            ],
        }


Scene = ImgScene | AudScene | VidScene


def scene_key(scene: Scene) -> str:
    """Canonical identity string; split disjointness is defined on this."""
    return json.dumps(scene.to_dict(), sort_keys=True, separators=(",", ":"))


def scene_from_dict(data: dict) -> Scene:
    kind = data["kind"]
    if kind == "img":
        return ImgScene(
            tuple(
                ImgObject(o["color"], o["shape"], int(o["row"]), int(o["col"]))
                for o in data["objects"]
            )
        )
    if kind == "aud":
        return AudScene(tuple((e["event"], e["loudness"]) for e in data["events"]))
    if kind == "vid":
        return VidScene(
            tuple(
                VidObject(
                    o["color"], o["shape"], int(o["row"]), int(o["col"]), o["direction"]
                )
                for o in data["objects"]
            )
        )
    raise ValueError(f"unknown scene kind {kind!r}")


def _as_rng(seed_or_rng: int | np.random.Generator) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def _img_objects(rng: np.random.Generator, n: int) -> tuple[ImgObject, ...]:
    colors = [COLORS[i] for i in rng.permutation(len(COLORS))[:n]]
    shapes = [SHAPES[i] for i in rng.permutation(len(SHAPES))[:n]]
    cells = rng.permutation(GRID * GRID)[:n]
    return tuple(
        ImgObject(colors[i], shapes[i], int(cells[i]) // GRID, int(cells[i]) % GRID)
        for i in range(n)
    )


def _legal_start(rng: np.random.Generator, direction: str) -> tuple[int, int]:
    # All N_FRAMES positions must stay on the grid, so the moving
    # coordinate is pinned to the far edge.
    free = int(rng.integers(0, GRID))
    if direction == "left":
        return free, GRID - 1
    if direction == "right":
        return free, 0
    if direction == "up":
        return GRID - 1, free
    return 0, free


def generate_scene(modality: Modality, seed_or_rng: int | np.random.Generator) -> Scene:
    rng = _as_rng(seed_or_rng)
    if modality is Modality.IMG:
        n = int(rng.integers(1, 4))
        return ImgScene(_img_objects(rng, n))
    if modality is Modality.AUD:
        order = rng.permutation(len(EVENTS))
        loud = rng.integers(0, 2, size=len(EVENTS))
        return AudScene(
            tuple((EVENTS[int(i)], LOUDNESS[int(l)]) for i, l in zip(order, loud))
        )
    if modality is Modality.VID:
        for _ in range(1000):
            n = int(rng.integers(1, 4))
            colors = [COLORS[i] for i in rng.permutation(len(COLORS))[:n]]
            shapes = [SHAPES[i] for i in rng.permutation(len(SHAPES))[:n]]
            dirs = [DIRECTIONS[i] for i in rng.permutation(len(DIRECTIONS))[:n]]
            objs = []
            for i in range(n):
                r, c = _legal_start(rng, dirs[i])
                objs.append(VidObject(colors[i], shapes[i], r, c, dirs[i]))
            scene = VidScene(tuple(objs))
            ok = all(
                len({(o.row, o.col) for o in fr.objects}) == len(fr.objects)
                for fr in scene.frames()
            )
            if ok:
                return scene
        raise RuntimeError("could not place video objects without collisions")
    raise ValueError(f"unknown modality {modality!r}")
