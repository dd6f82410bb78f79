"""Chat-completion backed expert. Every reply goes through the action grammar;
any backend or parse failure falls back to the scripted rule for that call."""

from __future__ import annotations

import logging
import re
from typing import Callable, Mapping, Sequence, TypeVar

from ..actions import ActionParseError, GlobalAction, Plan, parse_action, parse_plan, serialize
from ..feedback import Feedback, TrajectoryHistory
from ..perception import SceneDescription
from ..world import Task
from . import prompts
from .base import BackendFailure, ChatMessage, EmptyParse, ParsedInstruction, PlanExhausted, RemoteBackend
from .chat import ChatClient
from .scripted import ScriptedExpert, TermMatcher

log = logging.getLogger(__name__)

T = TypeVar("T")

_THOUGHT_RE = re.compile(r"^\s*thought\s*:\s*(?P<t>.+)$", re.IGNORECASE | re.MULTILINE)
_ACTION_LINE_RE = re.compile(r"^\s*action\s*:\s*(?P<a>.+)$", re.IGNORECASE | re.MULTILINE)
_NUMBERED_RE = re.compile(r"^\s*\d+\s*[.)]\s*(?P<item>.+?)\s*[;.,]?\s*$", re.MULTILINE)


def parse_thought_action(text: str) -> tuple[str, GlobalAction]:
    """Split a ``Thought: ... / Action: ...`` reply; the action must parse."""
    m = _ACTION_LINE_RE.search(text)
    action = parse_action(m.group("a")) if m else parse_action(text)
    t = _THOUGHT_RE.search(text)
    thought = t.group("t").strip() if t else ""
    return thought, action


def parse_landmark_list(text: str) -> list[str]:
    items = [m.group("item").strip().lower() for m in _NUMBERED_RE.finditer(text)]
    return [re.sub(r"\s+", " ", i.strip(" ;.,")) for i in items if i.strip(" ;.,")]


class RemoteExpert:
    """Planner, parser and reviewer backed by an OpenAI-style endpoint."""

    name = "remote"

    def __init__(
        self,
        backend: RemoteBackend,
        lexicon: Mapping[str, Sequence[str]],
        seed: int = 0,
        client: ChatClient | None = None,
        strict: bool = False,
    ):
        self.backend = backend
        self.client = client if client is not None else ChatClient(backend)
        self.fallback = ScriptedExpert(lexicon, seed)
        self.strict = strict
        self.fallbacks = 0
        self.calls = 0

    def close(self) -> None:
        self.client.close()

    def _chat(self, system: str | None, user: str) -> str:
        messages = [ChatMessage("system", system)] if system else []
        messages.append(ChatMessage("user", user))
        self.calls += 1
        return self.client.complete(messages)

    def _guarded(self, what: str, remote: Callable[[], T], scripted: Callable[[], T]) -> T:
        try:
            return remote()
        except (BackendFailure, ActionParseError, EmptyParse) as exc:
            if self.strict:
                raise
            self.fallbacks += 1
            log.warning("%s: remote expert failed (%s); using scripted rule", what, exc)
            return scripted()

    # ------------------------------------------------------------ parsing

    def parse_instruction(self, instruction: str, task: Task, options: Sequence[str] = ()) -> ParsedInstruction:
        if not instruction.strip():
            raise ValueError("instruction must be non-empty")
        if task is Task.OBJECT_NAV:
            return ParsedInstruction((instruction.strip().lower(),))

        def remote() -> ParsedInstruction:
            reply = self._chat(None, prompts.parse_prompt(task, instruction, options))
            if task is Task.STEP_BY_STEP:
                marks = parse_landmark_list(reply)
                if not marks:
                    raise EmptyParse(f"no landmarks in reply {reply[:80]!r}")
                return ParsedInstruction((marks[-1],), tuple(marks))
            # map free text back onto known names where possible
            known = TermMatcher(set(options) | set(self.fallback.lexicon) | {v for vs in self.fallback.lexicon.values() for v in vs})
            names = list(dict.fromkeys(known.find(reply)))
            if not names:
                cleaned = re.sub(r"\s+", " ", reply.strip().strip(".").lower())
                if not cleaned or len(cleaned.split()) > 4:
                    raise EmptyParse(f"could not read an object from reply {reply[:80]!r}")
                names = [cleaned]
            return ParsedInstruction(tuple(names))

        return self._guarded("parse_instruction", remote, lambda: self.fallback.parse_instruction(instruction, task, options))

    # ------------------------------------------------------------ planning

    def propose_plan(self, instruction: str, parsed: ParsedInstruction, scene: SceneDescription | None = None) -> Plan:
        def remote() -> Plan:
            text = scene.text if scene is not None else ""
            user = prompts.initial_plan_prompt(instruction, parsed.goal_categories, parsed.landmark_categories, text)
            return parse_plan(self._chat(prompts.PLANNER_SYSTEM, user))

        return self._guarded("propose_plan", remote, lambda: self.fallback.propose_plan(instruction, parsed, scene))

    def next_action(
        self,
        history: TrajectoryHistory | None,
        scene: SceneDescription,
        instruction: str,
        parsed: ParsedInstruction,
        plan: Plan,
        executed: int,
    ) -> tuple[str, GlobalAction]:
        if executed >= len(plan):
            raise PlanExhausted(f"plan pointer {executed} past plan of length {len(plan)}")

        def remote() -> tuple[str, GlobalAction]:
            user = prompts.next_action_prompt(
                instruction,
                parsed.goal_categories,
                parsed.landmark_categories,
                scene.text,
                plan,
                executed,
                history.summarize() if history is not None else "",
                _last_feedback(history),
            )
            return parse_thought_action(self._chat(prompts.PLANNER_SYSTEM, user))

        return self._guarded(
            "next_action",
            remote,
            lambda: self.fallback.next_action(history, scene, instruction, parsed, plan, executed),
        )

    def replan(
        self,
        history: TrajectoryHistory | None,
        scene: SceneDescription,
        instruction: str,
        parsed: ParsedInstruction,
        plan: Plan,
        executed: int,
        feedback: Feedback,
    ) -> Plan:
        def remote() -> Plan:
            user = prompts.replan_prompt(
                instruction,
                parsed.goal_categories,
                parsed.landmark_categories,
                scene.text,
                plan,
                executed,
                history.summarize() if history is not None else "",
                f"{feedback.kind.value}: {feedback.message}",
            )
            return parse_plan(self._chat(prompts.PLANNER_SYSTEM, user))

        return self._guarded(
            "replan",
            remote,
            lambda: self.fallback.replan(history, scene, instruction, parsed, plan, executed, feedback),
        )

    # ------------------------------------------------------------ review

    def review_action(self, thought: str, action: GlobalAction, scene: SceneDescription) -> tuple[str, GlobalAction]:
        def remote() -> tuple[str, GlobalAction]:
            user = prompts.review_prompt(thought, serialize(action), scene.text)
            new_thought, new_action = parse_thought_action(self._chat(prompts.REVIEWER_SYSTEM, user))
            return new_thought or thought, new_action

        return self._guarded("review_action", remote, lambda: self.fallback.review_action(thought, action, scene))


def _last_feedback(history: TrajectoryHistory | None) -> str | None:
    if history is None or not history.entries:
        return None
    fb = history.entries[-1].feedback
    return f"{fb.kind.value}: {fb.message}"
