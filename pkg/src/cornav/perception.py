"""Vision perception expert, as a ground-truth oracle with configurable noise.

Image tagging becomes "categories visible per view"; open-vocabulary grounding
becomes query/lexicon matching over visible objects and rooms; segmentation
refinement is exact because the oracle knows the true hit range.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .geometry import DIRECTIONS, CameraIntrinsics, Pose, WorldPoint, pixel_to_world
from .world import DirectionalView, SceneMap, render_views

Lexicon = Mapping[str, Sequence[str]]


@dataclass(frozen=True)
class NoiseConfig:
    tag_false_negative_rate: float = 0.0
    tag_distractor_rate: float = 0.0
    detect_false_negative_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("tag_false_negative_rate", "tag_distractor_rate", "detect_false_negative_rate"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")


@dataclass(frozen=True)
class Detection:
    category: str
    matched_query: str
    direction: str
    first_col: int
    last_col: int
    range: float
    estimated_position: WorldPoint
    score: float = 1.0
    kind: str = "object"  # or "room"
    source_id: str = ""

    @property
    def midpoint(self) -> float:
        return (self.first_col + self.last_col) / 2.0


@dataclass(frozen=True)
class SceneDescription:
    tags: dict[str, tuple[str, ...]]
    detections: tuple[Detection, ...]
    text: str

    def detected(self, name: str) -> list[Detection]:
        return [d for d in self.detections if d.category == name or d.matched_query == name]

    def detections_in(self, direction: str) -> list[Detection]:
        return [d for d in self.detections if d.direction == direction]


def load_lexicon(source: str | Path | bytes | None = None) -> dict[str, list[str]]:
    """Load a synonym table; ``None`` loads the bundled one."""
    if source is None:
        raw = resources.files("cornav.data").joinpath("lexicon.json").read_bytes()
    elif isinstance(source, (bytes, bytearray)):
        raw = bytes(source)
    else:
        raw = Path(source).read_bytes()
    data = json.loads(raw.decode("utf-8"))
    if not isinstance(data, dict):
        raise ValueError("lexicon must map query terms to lists of category names")
    out = {}
    for key, vals in data.items():
        if not isinstance(vals, list):
            raise ValueError(f"lexicon entry {key!r} must be a list")
        out[str(key).strip().lower()] = [str(v).strip().lower() for v in vals]
    return out


def query_matches(query: str, category: str, lexicon: Lexicon) -> bool:
    return category == query or category in lexicon.get(query, ())


def tag_views(
    views: Mapping[str, DirectionalView],
    noise: NoiseConfig,
    rng: random.Random | None = None,
    vocabulary: Sequence[str] = (),
) -> dict[str, list[str]]:
    """Per-direction tag lists: visible categories, nearest first, after noise."""
    rng = rng if rng is not None else random.Random(noise.seed)
    vocab = sorted(set(vocabulary))
    out = {}
    for d in DIRECTIONS:
        tags: list[str] = []
        for v in views[d].visible:
            if v.category in tags:
                continue
            if noise.tag_false_negative_rate > 0 and rng.random() < noise.tag_false_negative_rate:
                continue
            tags.append(v.category)
        if vocab and noise.tag_distractor_rate > 0 and rng.random() < noise.tag_distractor_rate:
            extra = rng.choice(vocab)
            if extra not in tags:
                tags.append(extra)
        out[d] = tags
    return out


def detect(
    views: Mapping[str, DirectionalView],
    queries: Iterable[str],
    lexicon: Lexicon,
    noise: NoiseConfig,
    rng: random.Random | None = None,
) -> list[Detection]:
    """Match queries against visible objects (and rooms by name)."""
    queries = [q.strip().lower() for q in queries if q and q.strip()]
    if not queries:
        raise ValueError("detect needs at least one query")
    rng = rng if rng is not None else random.Random(noise.seed)
    drop = noise.detect_false_negative_rate
    found: list[Detection] = []
    seen = set()
    for q in dict.fromkeys(queries):
        for d in DIRECTIONS:
            view = views[d]
            for v in view.visible:
                if not query_matches(q, v.category, lexicon) or (q, v.id) in seen:
                    continue
                seen.add((q, v.id))
                if drop > 0 and rng.random() < drop:
                    continue
                mid = (v.first_col + v.last_col) / 2.0
                pos = pixel_to_world(mid, v.range, view.pose, d, view.intrinsics)
                found.append(Detection(v.category, q, d, v.first_col, v.last_col, v.range, pos, 1.0, "object", v.id))
            for room in view.visible_rooms:
                if not query_matches(q, room.name, lexicon) or (q, "room:" + room.name) in seen:
                    continue
                seen.add((q, "room:" + room.name))
                if drop > 0 and rng.random() < drop:
                    continue
                pos = pixel_to_world(room.column, room.range, view.pose, d, view.intrinsics)
                found.append(
                    Detection(room.name, q, d, room.column, room.column, room.range, pos, 1.0, "room", "room:" + room.name)
                )
    order = {d: i for i, d in enumerate(DIRECTIONS)}
    found.sort(key=lambda x: (order[x.direction], x.range, x.category, x.source_id, x.matched_query))
    return found


def describe(tags: Mapping[str, Sequence[str]], detections: Sequence[Detection]) -> str:
    """Fixed-template text: one line per direction, front/left/right/rear."""
    lines = []
    for d in DIRECTIONS:
        tag_list = sorted(set(tags.get(d, ())))
        per_dir = {}
        for det in detections:
            key = det.source_id or det.category
            if det.direction == d and key not in per_dir:
                per_dir[key] = det
        dets = sorted(per_dir.values(), key=lambda x: (round(x.range, 1), x.category, x.source_id))
        det_txt = ", ".join(f"{x.category}@~{x.range:.1f}m" for x in dets)
        lines.append(f"{d}: tags=[{', '.join(tag_list)}]; detected=[{det_txt}]")
    return "\n".join(lines)


def perceive(
    views: Mapping[str, DirectionalView],
    queries: Iterable[str],
    lexicon: Lexicon,
    noise: NoiseConfig,
    rng: random.Random,
    vocabulary: Sequence[str] = (),
) -> SceneDescription:
    tags = tag_views(views, noise, rng, vocabulary)
    queries = list(queries)
    dets = detect(views, queries, lexicon, noise, rng) if queries else []
    return SceneDescription({d: tuple(tags[d]) for d in DIRECTIONS}, tuple(dets), describe(tags, dets))


@dataclass
class Sensor:
    """Per-episode perception front end: renders the scene and applies the noisy oracle."""

    scene: SceneMap
    lexicon: Lexicon
    noise: NoiseConfig
    rng: random.Random
    intrinsics: CameraIntrinsics = CameraIntrinsics()
    renders: int = 0

    @property
    def vocabulary(self) -> list[str]:
        return self.scene.categories()

    def render(self, pose: Pose) -> dict[str, DirectionalView]:
        self.renders += 1
        return render_views(self.scene, pose, self.intrinsics)

    def observe(self, views: Mapping[str, DirectionalView], queries: Iterable[str]) -> SceneDescription:
        return perceive(views, queries, self.lexicon, self.noise, self.rng, self.vocabulary)

    def detect(self, views: Mapping[str, DirectionalView], queries: Iterable[str]) -> list[Detection]:
        return detect(views, queries, self.lexicon, self.noise, self.rng)
