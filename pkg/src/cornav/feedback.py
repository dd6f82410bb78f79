"""In-plan / out-of-plan feedback, plan splicing and the trajectory history."""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from enum import Enum

from .actions import GlobalAction, MoveToDirection, MoveToObject, MoveToRoom, Plan, Stop, serialize

SUCCESS_THRESHOLD_M = 1.5
DIRECTION_DISTANCE_M = 1.5
DIRECTION_TOLERANCE_M = 0.2
DEFAULT_HISTORY_WINDOW = 10

MOVE_OK = "successfully move to {name}"
MOVE_FAILED = "move to {name} failed"
TURN_OK = "successfully turn to direction {direction}"
TURN_FAILED = "turn to direction {direction} failed"
STOP_MESSAGE = "stop"


class FeedbackKind(str, Enum):
    IN_PLAN = "InPlan"
    OUT_OF_PLAN = "OutOfPlan"


@dataclass(frozen=True)
class Feedback:
    kind: FeedbackKind
    action: GlobalAction
    message: str

    @property
    def ok(self) -> bool:
        return self.kind is FeedbackKind.IN_PLAN


def evaluate_action(
    action: GlobalAction,
    outcome,
    threshold: float = SUCCESS_THRESHOLD_M,
) -> Feedback:
    """Classify an executed global action.

    Object/room moves succeed when the final pose is within ``threshold`` of
    the position perception grounded the target at; direction moves succeed
    when the agent covered the requested distance minus one forward step.
    """
    if isinstance(action, Stop):
        return Feedback(FeedbackKind.IN_PLAN, action, STOP_MESSAGE)
    if isinstance(action, MoveToDirection):
        requested = outcome.requested_distance if outcome.requested_distance is not None else DIRECTION_DISTANCE_M
        if outcome.traveled >= requested - DIRECTION_TOLERANCE_M - 1e-9:
            return Feedback(FeedbackKind.IN_PLAN, action, TURN_OK.format(direction=action.direction))
        return Feedback(FeedbackKind.OUT_OF_PLAN, action, TURN_FAILED.format(direction=action.direction))
    name = action.name
    g = outcome.grounded
    if g is not None and outcome.final_pose.distance_to(g.x, g.y) <= threshold:
        return Feedback(FeedbackKind.IN_PLAN, action, MOVE_OK.format(name=name))
    return Feedback(FeedbackKind.OUT_OF_PLAN, action, MOVE_FAILED.format(name=name))


_MESSAGE_PATTERNS = (
    (re.compile(r"^successfully move to (?P<arg>.+)$"), FeedbackKind.IN_PLAN, "move"),
    (re.compile(r"^move to (?P<arg>.+) failed$"), FeedbackKind.OUT_OF_PLAN, "move"),
    (re.compile(r"^successfully turn to direction (?P<arg>\w+)$"), FeedbackKind.IN_PLAN, "turn"),
    (re.compile(r"^turn to direction (?P<arg>\w+) failed$"), FeedbackKind.OUT_OF_PLAN, "turn"),
)


def parse_feedback_message(message: str) -> tuple[FeedbackKind, str, str]:
    """Inverse of the templates: ``(kind, "move" | "turn", argument)``.

    Object and room moves share a template, so only the name comes back.
    """
    for pattern, kind, family in _MESSAGE_PATTERNS:
        m = pattern.match(message)
        if m:
            return kind, family, m.group("arg")
    raise ValueError(f"not a feedback message: {message!r}")


def compose_refined_plan(original: Plan, executed: int, failed_index: int, new_tail: Plan) -> Plan:
    """Keep ``original[:failed_index]`` and replace everything after with ``new_tail``."""
    if failed_index != executed:
        raise ValueError(f"failed_index {failed_index} must equal executed count {executed}")
    if not 0 <= failed_index <= len(original):
        raise ValueError(f"failed_index {failed_index} outside plan of length {len(original)}")
    prefix = original.actions[:failed_index]
    if prefix and isinstance(prefix[-1], Stop):
        raise ValueError("cannot splice after stop()")
    return Plan(prefix + tuple(new_tail))


@dataclass(frozen=True)
class HistoryEntry:
    step: int
    scene_digest: str
    thought: str
    action: GlobalAction
    feedback: Feedback


def scene_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]


@dataclass
class TrajectoryHistory:
    entries: list[HistoryEntry] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def record(self, entry: HistoryEntry) -> "TrajectoryHistory":
        if self.entries and entry.step <= self.entries[-1].step:
            raise ValueError("history steps must be strictly increasing")
        if not self.entries and entry.step != 0:
            raise ValueError("history must start at step 0")
        self.entries.append(entry)
        return self

    def summarize(self, max_entries: int = DEFAULT_HISTORY_WINDOW) -> str:
        if max_entries <= 0:
            return ""
        return "\n".join(
            f"[t{e.step}] did {serialize(e.action)} -> {e.feedback.kind.value}: {e.feedback.message}"
            for e in self.entries[-max_entries:]
        )

    def failed_targets(self) -> set[str]:
        out = set()
        for e in self.entries:
            if not e.feedback.ok and isinstance(e.action, (MoveToObject, MoveToRoom)):
                out.add(e.action.name)
        return out

    def failed_directions(self) -> set[str]:
        """Directions that failed since the last successful action.

        Directions are body-relative, so an old failure says nothing once the
        agent has moved on.
        """
        out = set()
        for e in reversed(self.entries):
            if e.feedback.ok:
                break
            if isinstance(e.action, MoveToDirection):
                out.add(e.action.direction)
        return out


def record(history: TrajectoryHistory, entry: HistoryEntry) -> TrajectoryHistory:
    return history.record(entry)


def summarize(history: TrajectoryHistory, max_entries: int = DEFAULT_HISTORY_WINDOW) -> str:
    return history.summarize(max_entries)
