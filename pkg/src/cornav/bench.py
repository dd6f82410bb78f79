"""Scoring (SR, SPL, DTS) against geodesic distances on the ground-truth map."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from .geometry import Pose
from .local_policy.fmm import fmm_arrival, inflate
from .world import AGENT_RADIUS_M, EpisodeSpec, SceneMap

SUCCESS_THRESHOLD_M = 1.5


class InvalidEpisode(ValueError):
    """The episode cannot be scored (no target instance, or it starts already solved)."""


@dataclass(frozen=True)
class EpisodeResult:
    id: str
    task: str
    success: bool
    p: float  # agent path length
    l: float  # oracle shortest path length
    final_distance: float
    dts: float

    def __post_init__(self):
        if self.p < 0:
            raise ValueError("path length must be non-negative")
        if not self.l > 0:
            raise ValueError("oracle length must be positive")
        if self.dts < 0:
            raise ValueError("dts must be non-negative")

    @property
    def spl_term(self) -> float:
        return float(self.success) * self.l / max(self.p, self.l)


@dataclass(frozen=True)
class MetricsSummary:
    sr: float
    spl: float
    dts: float
    count: int

    def to_dict(self) -> dict:
        return {"SR": self.sr, "SPL": self.spl, "DTS": self.dts, "episodes": self.count}

    def table(self) -> str:
        return (
            f"episodes  {self.count}\n"
            f"SR        {100 * self.sr:6.2f} %\n"
            f"SPL       {100 * self.spl:6.2f} %\n"
            f"DTS       {self.dts:8.3f} m"
        )


def success_and_dts(distance: float, threshold: float = SUCCESS_THRESHOLD_M) -> tuple[bool, float]:
    """Inclusive boundary: a distance of exactly ``threshold`` is a success."""
    return distance <= threshold, max(0.0, distance - threshold)


class GeodesicOracle:
    """Caches ground-truth FMM fields per target set for one scene."""

    def __init__(self, scene: SceneMap, inflation: float = AGENT_RADIUS_M, threshold: float = SUCCESS_THRESHOLD_M):
        self.scene = scene
        self.inflation = inflation
        self.threshold = threshold
        self._free = ~scene.occupied
        self._inflated_free = ~inflate(scene.occupied, inflation, scene.resolution)
        self._target_fields: dict[tuple[str, ...], np.ndarray] = {}

    def target_cells(self, categories: Iterable[str]) -> list[tuple[int, int]]:
        cats = set(categories)
        return sorted({self.scene.cell_of(o.position.x, o.position.y) for o in self.scene.objects if o.category in cats})

    def target_field(self, categories: Sequence[str]) -> np.ndarray:
        """Geodesic distance (m) to the nearest instance of any category, no inflation."""
        key = tuple(sorted(set(categories)))
        if key not in self._target_fields:
            cells = self.target_cells(key)
            if not cells:
                raise InvalidEpisode(f"no instance of {list(key)} in scene {self.scene.name!r}")
            self._target_fields[key] = fmm_arrival(self._free, cells) * self.scene.resolution
        return self._target_fields[key]

    def distance(self, pose: Pose, categories: Sequence[str]) -> float:
        field = self.target_field(categories)
        return float(field[self.scene.cell_of(pose.x, pose.y)])

    def oracle_length(self, start: Pose, categories: Sequence[str]) -> float:
        """Shortest inflated path from ``start`` into the success region."""
        field = self.target_field(categories)
        region = np.argwhere(field <= self.threshold)
        res = self.scene.resolution
        passable = self._inflated_free.copy()
        # the start disc is known clear even where cell-centre inflation says otherwise
        r0, c0 = self.scene.cell_of(start.x, start.y)
        span = int(math.ceil((self.inflation + res) / res))
        for r in range(max(0, r0 - span), min(self.scene.height, r0 + span + 1)):
            for c in range(max(0, c0 - span), min(self.scene.width, c0 + span + 1)):
                if self._free[r, c] and math.hypot((c + 0.5) * res - start.x, (r + 0.5) * res - start.y) <= self.inflation:
                    passable[r, c] = True
        passable[r0, c0] = True
        arrival = fmm_arrival(passable, [tuple(map(int, rc)) for rc in region], stop_at=(r0, c0))
        return float(arrival[r0, c0] * res)


def score_episode(trace, scene: SceneMap, episode: EpisodeSpec, oracle: GeodesicOracle | None = None) -> EpisodeResult:
    oracle = oracle if oracle is not None else GeodesicOracle(scene)
    if trace.final_pose is None:
        raise ValueError(f"trace for {episode.id} is incomplete")
    targets = episode.target_categories
    final = oracle.distance(trace.final_pose, targets)
    l = oracle.oracle_length(episode.start, targets)
    if not l > 0:
        raise InvalidEpisode(f"episode {episode.id} starts inside the success region")
    if not math.isfinite(l):
        raise InvalidEpisode(f"episode {episode.id}: no path from the start to a target")
    success, dts = success_and_dts(final, oracle.threshold)
    return EpisodeResult(episode.id, episode.task.value, success, trace.path_length, l, final, dts)


def summarize(results: Sequence[EpisodeResult]) -> MetricsSummary:
    if not results:
        raise ValueError("cannot summarize an empty result set")
    n = len(results)
    sr = sum(r.success for r in results) / n
    spl = math.fsum(r.spl_term for r in results) / n
    dts = math.fsum(r.dts for r in results) / n
    return MetricsSummary(sr, spl, dts, n)


def results_document(results: Sequence[EpisodeResult], meta: dict | None = None) -> dict:
    ordered = sorted(results, key=lambda r: r.id)
    return {
        "summary": summarize(ordered).to_dict(),
        "meta": meta or {},
        "results": [asdict(r) for r in ordered],
    }


def dumps_results(results: Sequence[EpisodeResult], meta: dict | None = None) -> str:
    return json.dumps(results_document(results, meta), indent=2, sort_keys=True) + "\n"


def loads_results(text: str) -> list[EpisodeResult]:
    doc = json.loads(text)
    try:
        return [EpisodeResult(**r) for r in doc["results"]]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed results file: {exc}") from exc


def to_csv(results: Sequence[EpisodeResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", "task", "success", "p", "l", "dts"])
    for r in sorted(results, key=lambda r: r.id):
        w.writerow([r.id, r.task, int(r.success), f"{r.p:.6f}", f"{r.l:.6f}", f"{r.dts:.6f}"])
    return buf.getvalue()
