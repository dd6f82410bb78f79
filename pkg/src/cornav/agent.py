"""Episode orchestrators: the discussion loop with ablation toggles, and the FBE baseline."""

from __future__ import annotations

import json
import logging
import random
import re
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .actions import GlobalAction, MoveToObject, MoveToRoom, Plan, Stop, serialize
from .experts import CONTAINERS, Expert, ParsedInstruction, PlanExhausted
from .feedback import (
    Feedback,
    FeedbackKind,
    HistoryEntry,
    TrajectoryHistory,
    compose_refined_plan,
    evaluate_action,
    scene_digest,
)
from .geometry import LowLevelAction, Pose, WorldPoint
from .local_policy.acting import ActingConfig, execute_global, navigate
from .local_policy.frontier import nearest_frontier
from .local_policy.mapping import OccupancyGrid, update_occupancy
from .perception import NoiseConfig, SceneDescription, Sensor
from .world import EpisodeSpec, SceneMap, step

log = logging.getLogger(__name__)

STOPPED = "Stopped"
BUDGET_EXHAUSTED = "BudgetExhausted"
ERROR = "Error"

FRONTIER_GOAL_RADIUS_M = 0.3


@dataclass(frozen=True)
class AgentConfig:
    use_feedback: bool = True
    use_history: bool = True
    use_decision_expert: bool = True
    use_instruction_expert: bool = True
    max_global_actions: int = 20
    max_replans: int = 10
    step_budget: int = 300  # per global action
    max_episode_steps: int = 1000
    noise: NoiseConfig = NoiseConfig()
    threshold: float = 1.5

    def __post_init__(self):
        # zero global actions is allowed: it yields an immediate BudgetExhausted
        if self.max_global_actions < 0 or self.max_replans < 0:
            raise ValueError("action and replan budgets must be non-negative")
        if self.step_budget < 1 or self.max_episode_steps < 1:
            raise ValueError("step budgets must be positive")
        if self.threshold <= 0:
            raise ValueError("threshold must be positive")

    def acting(self) -> ActingConfig:
        return ActingConfig(threshold=self.threshold)


def _pose_dict(p: Pose) -> dict:
    return {"x": p.x, "y": p.y, "heading": p.heading}


@dataclass
class StepRecord:
    index: int
    scene: str
    thought: str
    proposed: str
    action: str
    feedback: str | None
    message: str | None
    pose_before: dict
    pose_after: dict
    low_level: str
    steps: int
    traveled: float
    replanned: bool = False
    plan: list[str] = field(default_factory=list)
    executed: int = 0
    failure: str | None = None

    def to_dict(self) -> dict:
        return {"kind": "step", **asdict(self)}


@dataclass
class EpisodeTrace:
    episode_id: str
    agent: str
    start: Pose
    targets: tuple[str, ...]
    records: list[StepRecord] = field(default_factory=list)
    final_pose: Pose | None = None
    termination: str = BUDGET_EXHAUSTED
    detail: str = ""
    goals: tuple[str, ...] = ()
    landmarks: tuple[str, ...] = ()
    landmarks_visited: int = 0
    frontier_visits: int = 0
    replans: int = 0

    @property
    def low_level(self) -> str:
        return "".join(r.low_level for r in self.records)

    @property
    def total_steps(self) -> int:
        return sum(r.steps for r in self.records)

    @property
    def path_length(self) -> float:
        # translation only; turns are zero length
        return sum(r.traveled for r in self.records)

    def end_record(self) -> dict:
        fp = self.final_pose or self.start
        return {
            "kind": "end",
            "episode_id": self.episode_id,
            "agent": self.agent,
            "start": _pose_dict(self.start),
            "targets": list(self.targets),
            "goals": list(self.goals),
            "landmarks": list(self.landmarks),
            "final_pose": _pose_dict(fp),
            "termination": self.termination,
            "detail": self.detail,
            "total_steps": self.total_steps,
            "path_length": self.path_length,
            "landmarks_visited": self.landmarks_visited,
            "frontier_visits": self.frontier_visits,
            "replans": self.replans,
        }

    def to_jsonl(self) -> str:
        lines = [json.dumps(r.to_dict(), sort_keys=True) for r in self.records]
        lines.append(json.dumps(self.end_record(), sort_keys=True))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "EpisodeTrace":
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not rows or rows[-1].get("kind") != "end":
            raise ValueError("trace has no end record")
        end = rows[-1]
        trace = cls(
            episode_id=end["episode_id"],
            agent=end["agent"],
            start=Pose(**end["start"]),
            targets=tuple(end["targets"]),
            final_pose=Pose(**end["final_pose"]),
            termination=end["termination"],
            detail=end.get("detail", ""),
            goals=tuple(end.get("goals", ())),
            landmarks=tuple(end.get("landmarks", ())),
            landmarks_visited=end.get("landmarks_visited", 0),
            frontier_visits=end.get("frontier_visits", 0),
            replans=end.get("replans", 0),
        )
        for r in rows[:-1]:
            r = dict(r)
            r.pop("kind", None)
            trace.records.append(StepRecord(**r))
        return trace


def replay(scene: SceneMap, start: Pose, low_level: str) -> Pose:
    """Re-simulate a recorded low-level action string from ``start``."""
    pose = start
    for code in low_level:
        pose, _ = step(scene, pose, LowLevelAction.from_short(code))
    return pose


_NAME_JUNK = re.compile(r"[()\"'`]")


def raw_goal(instruction: str) -> ParsedInstruction:
    """Goal used when the instruction expert is disabled: the whole text as one term."""
    text = " ".join(_NAME_JUNK.sub(" ", instruction).lower().split())
    return ParsedInstruction((text,))


def _queries(parsed: ParsedInstruction, plan: Plan | None, containers: bool) -> list[str]:
    names = list(parsed.goal_categories) + list(parsed.landmark_categories)
    if plan is not None:
        names += [a.name for a in plan if isinstance(a, (MoveToObject, MoveToRoom))]
    if containers:
        names += list(CONTAINERS)
    return list(dict.fromkeys(names))


def _target(action: GlobalAction) -> str | None:
    return action.name if isinstance(action, (MoveToObject, MoveToRoom)) else None


def episode_rng(seed: int, episode_id: str) -> random.Random:
    return random.Random(f"{seed}:{episode_id}")


class _Episode:
    """Mutable per-episode state shared by both orchestrators."""

    def __init__(self, scene: SceneMap, episode: EpisodeSpec, lexicon, config: AgentConfig, seed: int, agent: str):
        self.scene = scene
        self.episode = episode
        self.config = config
        self.sensor = Sensor(scene, lexicon, config.noise, episode_rng(seed, episode.id))
        self.grid = OccupancyGrid.unknown_like(scene)
        self.pose = episode.start
        self.trace = EpisodeTrace(episode.id, agent, episode.start, episode.target_categories)

    def look(self):
        views = self.sensor.render(self.pose)
        update_occupancy(self.grid, self.pose, views)
        return views

    def steps_left(self) -> int:
        return min(self.config.step_budget, self.config.max_episode_steps - self.trace.total_steps)

    def finish(self, termination: str, detail: str = "") -> EpisodeTrace:
        self.trace.termination = termination
        self.trace.detail = detail
        self.trace.final_pose = self.pose
        return self.trace


def run_episode(
    scene: SceneMap,
    episode: EpisodeSpec,
    expert: Expert,
    config: AgentConfig = AgentConfig(),
    lexicon: Mapping[str, Sequence[str]] | None = None,
    seed: int = 0,
) -> EpisodeTrace:
    """Run the plan / act / feedback / replan loop for one episode. Never raises."""
    lexicon = lexicon if lexicon is not None else expert_lexicon(expert)
    ep = _Episode(scene, episode, lexicon, config, seed, "cornav")
    try:
        return _run_cornav(ep, expert)
    except Exception as exc:  # the trace records the failure; the benchmark keeps going
        log.exception("episode %s failed", episode.id)
        return ep.finish(ERROR, f"{type(exc).__name__}: {exc}")


def expert_lexicon(expert) -> Mapping[str, Sequence[str]]:
    fallback = getattr(expert, "fallback", None)
    return (fallback or expert).lexicon


def _run_cornav(ep: _Episode, expert: Expert) -> EpisodeTrace:
    cfg = ep.config
    episode = ep.episode
    if cfg.max_global_actions == 0:
        return ep.finish(BUDGET_EXHAUSTED, "max_global_actions is 0")

    if cfg.use_instruction_expert:
        parsed = expert.parse_instruction(episode.instruction, episode.task, ep.scene.categories())
    else:
        parsed = raw_goal(episode.instruction)
    ep.trace.goals = parsed.goal_categories
    ep.trace.landmarks = parsed.landmark_categories

    views = ep.look()
    queries = _queries(parsed, None, cfg.use_decision_expert)
    desc = ep.sensor.observe(views, queries)
    plan = expert.propose_plan(episode.instruction, parsed, desc)
    executed = 0
    history = TrajectoryHistory()
    last: Feedback | None = None
    visited_landmarks: set[str] = set()

    for g in range(cfg.max_global_actions):
        if ep.steps_left() <= 0:
            return ep.finish(BUDGET_EXHAUSTED, "episode step budget exhausted")
        if g > 0:
            views = ep.look()
            queries = _queries(parsed, plan, cfg.use_decision_expert)
            desc = ep.sensor.observe(views, queries)

        replanned = False
        if last is not None and not last.ok and cfg.use_feedback:
            if ep.trace.replans >= cfg.max_replans:
                return ep.finish(BUDGET_EXHAUSTED, "replan budget exhausted")
            tail = expert.replan(
                history if cfg.use_history else None, desc, episode.instruction, parsed, plan, executed, last
            )
            plan = compose_refined_plan(plan, executed, executed, tail)
            ep.trace.replans += 1
            replanned = True
            extended = _queries(parsed, plan, cfg.use_decision_expert)
            if set(extended) - set(queries):
                # the new tail names objects that were not queried on this frame
                queries = extended
                desc = ep.sensor.observe(views, queries)

        try:
            thought, proposed = expert.next_action(
                history if cfg.use_history else None, desc, episode.instruction, parsed, plan, executed
            )
        except PlanExhausted:
            thought, proposed = "the plan is used up", Stop()
        action = proposed
        if cfg.use_decision_expert:
            thought, action = expert.review_action(thought, proposed, desc)
            if cfg.use_history and action != proposed and _target(action) in history.failed_targets():
                # the reviewer cannot see the history; do not send it back to a known failure
                action = proposed

        before = ep.pose
        if isinstance(action, Stop):
            ep.trace.records.append(
                StepRecord(g, desc.text, thought, serialize(proposed), serialize(action), FeedbackKind.IN_PLAN.value,
                           "stop", _pose_dict(before), _pose_dict(before), "", 0, 0.0, replanned,
                           plan.serialize(), executed)
            )
            return ep.finish(STOPPED)

        outcome, ep.grid, ep.pose = execute_global(
            action, ep.scene, ep.pose, ep.grid, desc.detections, ep.steps_left(), ep.sensor, cfg.acting()
        )
        fb = evaluate_action(action, outcome, cfg.threshold)
        if cfg.use_history:
            history.record(HistoryEntry(g, scene_digest(desc.text), thought, action, fb))
        planned = plan[executed] if executed < len(plan) else None
        if fb.ok and isinstance(action, MoveToObject) and action.name in parsed.landmark_categories:
            visited_landmarks.add(action.name)
        if cfg.use_feedback:
            if fb.ok and action == planned:
                executed += 1
        else:
            executed += 1
        last = fb
        ep.trace.records.append(
            StepRecord(
                g, desc.text, thought, serialize(proposed), serialize(action), fb.kind.value, fb.message,
                _pose_dict(before), _pose_dict(ep.pose), "".join(outcome.low_level), outcome.steps,
                round(outcome.traveled, 10), replanned, plan.serialize(), executed, outcome.failure,
            )
        )
        ep.trace.landmarks_visited = len(visited_landmarks)

    return ep.finish(BUDGET_EXHAUSTED, "max_global_actions reached")


def run_fbe_baseline(
    scene: SceneMap,
    episode: EpisodeSpec,
    expert: Expert,
    config: AgentConfig = AgentConfig(),
    lexicon: Mapping[str, Sequence[str]] | None = None,
    seed: int = 0,
) -> EpisodeTrace:
    """Frontier-based exploration plus the detector: explore until a goal is seen, then go to it."""
    lexicon = lexicon if lexicon is not None else expert_lexicon(expert)
    ep = _Episode(scene, episode, lexicon, config, seed, "fbe")
    try:
        return _run_fbe(ep, expert)
    except Exception as exc:
        log.exception("episode %s failed", episode.id)
        return ep.finish(ERROR, f"{type(exc).__name__}: {exc}")


def _run_fbe(ep: _Episode, expert: Expert) -> EpisodeTrace:
    cfg = ep.config
    episode = ep.episode
    if cfg.max_global_actions == 0:
        return ep.finish(BUDGET_EXHAUSTED, "max_global_actions is 0")
    parsed = expert.parse_instruction(episode.instruction, episode.task, ep.scene.categories())
    ep.trace.goals = parsed.goal_categories
    goals = list(parsed.goal_categories)
    acting = cfg.acting()
    blacklist = np.zeros((ep.grid.height, ep.grid.width), dtype=bool)

    for g in range(cfg.max_global_actions):
        if ep.steps_left() <= 0:
            return ep.finish(BUDGET_EXHAUSTED, "episode step budget exhausted")
        views = ep.look()
        desc = ep.sensor.observe(views, goals)
        before = ep.pose
        target = next((name for name in goals if desc.detected(name)), None)
        if target is not None:
            action: GlobalAction = MoveToObject(target)
            outcome, ep.grid, ep.pose = execute_global(
                action, ep.scene, ep.pose, ep.grid, desc.detections, ep.steps_left(), ep.sensor, acting
            )
            fb = evaluate_action(action, outcome, cfg.threshold)
            _fbe_record(ep, g, desc, f"{target} detected", action, fb.kind.value, fb.message, before, outcome)
            if fb.ok:
                return ep.finish(STOPPED, "goal reached")
            continue

        cells = nearest_frontier(ep.grid, ep.pose, acting.inflation, exclude=blacklist)
        if cells is None:
            return ep.finish(STOPPED, "no frontier left")
        r, c = cells[0]
        gx, gy = ep.grid.cell_center(r, c)
        outcome = navigate(
            ep.scene, ep.pose, ep.grid, WorldPoint(gx, gy), FRONTIER_GOAL_RADIUS_M, ep.steps_left(), ep.sensor, acting
        )
        ep.pose = outcome.final_pose
        if outcome.reached:
            ep.trace.frontier_visits += 1
            kind, message = FeedbackKind.IN_PLAN.value, f"reached frontier ({r}, {c})"
        else:
            kind, message = FeedbackKind.OUT_OF_PLAN.value, f"frontier ({r}, {c}) unreachable"
        # never pick the same cluster twice; it is either explored now or unreachable
        for rc in cells:
            blacklist[rc] = True
        _fbe_record(ep, g, desc, f"explore frontier at ({gx:.2f}, {gy:.2f})", None, kind, message, before, outcome)

    return ep.finish(BUDGET_EXHAUSTED, "max_global_actions reached")


def _fbe_record(ep: _Episode, g: int, desc: SceneDescription, thought: str, action, kind, message, before, outcome):
    text = serialize(action) if action is not None else "explore()"
    ep.trace.records.append(
        StepRecord(
            g, desc.text, thought, text, text, kind, message, _pose_dict(before), _pose_dict(ep.pose),
            "".join(outcome.low_level), outcome.steps, round(outcome.traveled, 10), False, [], 0, outcome.failure,
        )
    )


__all__ = [
    "AgentConfig",
    "BUDGET_EXHAUSTED",
    "ERROR",
    "EpisodeTrace",
    "STOPPED",
    "StepRecord",
    "episode_rng",
    "raw_goal",
    "replay",
    "run_episode",
    "run_fbe_baseline",
]
