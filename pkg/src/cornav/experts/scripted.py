"""Deterministic rule-based expert used for tests, fixtures and as the remote fallback."""

from __future__ import annotations

import re
from typing import Mapping, Sequence

from ..actions import GlobalAction, MoveToDirection, MoveToObject, MoveToRoom, Plan, Stop, serialize
from ..feedback import Feedback, TrajectoryHistory
from ..geometry import DIRECTIONS
from ..perception import SceneDescription
from ..world import Task
from .base import EmptyParse, ParsedInstruction, PlanExhausted

CONTAINERS = ("shelf", "table", "counter", "closet", "fridge")
REVIEW_MIN_RANGE_M = 1.5

_WORD = re.compile(r"[a-z0-9]+")


def _plural_forms(word: str) -> set[str]:
    forms = {word, word + "s", word + "es"}
    if word.endswith("y") and len(word) > 1:
        forms.add(word[:-1] + "ies")
    return forms


def _tokens(text: str) -> list[str]:
    return _WORD.findall(text.lower())


class TermMatcher:
    """Longest-match lookup of multi-word terms in free text, plurals tolerated."""

    def __init__(self, terms):
        self._by_len: dict[int, dict[tuple[str, ...], str]] = {}
        for term in sorted(set(terms)):
            words = tuple(_tokens(term))
            if not words:
                continue
            table = self._by_len.setdefault(len(words), {})
            for last in sorted(_plural_forms(words[-1])):
                # an exact spelling always beats a plural reading of another term
                key = words[:-1] + (last,)
                if key not in table or last == words[-1]:
                    table[key] = term
        self._lengths = sorted(self._by_len, reverse=True)

    def find(self, text: str) -> list[str]:
        toks = _tokens(text)
        out = []
        i = 0
        while i < len(toks):
            for n in self._lengths:
                hit = self._by_len[n].get(tuple(toks[i : i + n]))
                if hit is not None:
                    out.append(hit)
                    i += n
                    break
            else:
                i += 1
        return out


def _dedupe(items) -> tuple[str, ...]:
    return tuple(dict.fromkeys(items))


class ScriptedExpert:
    """Pure function of its inputs and seed; no hidden state between calls."""

    name = "scripted"

    def __init__(self, lexicon: Mapping[str, Sequence[str]], seed: int = 0):
        self.lexicon = {k: tuple(v) for k, v in lexicon.items()}
        self.seed = seed

    # ------------------------------------------------------------ parsing

    def _expand(self, term: str, categories: set[str]) -> list[str]:
        if term in categories or term not in self.lexicon:
            return [term]
        return list(self.lexicon[term])

    def parse_instruction(self, instruction: str, task: Task, options: Sequence[str] = ()) -> ParsedInstruction:
        text = instruction.strip()
        if not text:
            raise ValueError("instruction must be non-empty")
        if task is Task.OBJECT_NAV:
            return ParsedInstruction((text.lower(),))
        categories = set(options)
        values = {v for vs in self.lexicon.values() for v in vs}
        matcher = TermMatcher(categories | set(self.lexicon) | values)
        found = []
        for term in matcher.find(text):
            found.extend(self._expand(term, categories))
        found = list(_dedupe(found))
        if not found:
            raise EmptyParse(f"no known object in instruction {instruction!r}")
        if task is Task.STEP_BY_STEP:
            return ParsedInstruction((found[-1],), tuple(found))
        return ParsedInstruction(tuple(found))

    # ------------------------------------------------------------ planning

    def propose_plan(self, instruction: str, parsed: ParsedInstruction, scene: SceneDescription | None = None) -> Plan:
        names = list(parsed.landmark_categories)
        goal = parsed.goal_categories[0]
        if not names or names[-1] != goal:
            names.append(goal)
        return Plan(tuple(MoveToObject(n) for n in names) + (Stop(),))

    def _tag_score(self, target: str, tags: Sequence[str]) -> int:
        related = {target, *self.lexicon.get(target, ())}
        words = set(_tokens(target))
        return sum(1 for t in tags if t in related or words & set(_tokens(t)))

    def best_direction(self, target: str | None, scene: SceneDescription | None, exclude=()) -> str:
        candidates = [d for d in DIRECTIONS if d not in exclude] or list(DIRECTIONS)
        if scene is None or target is None:
            return candidates[0]
        # max() keeps the first maximum, so DIRECTIONS order is the tie-break
        return max(candidates, key=lambda d: self._tag_score(target, scene.tags.get(d, ())))

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
        action = plan[executed]
        if isinstance(action, (MoveToObject, MoveToRoom)) and not scene.detected(action.name):
            exclude = _recent_failed_directions(history)
            d = self.best_direction(action.name, scene, exclude)
            return f"{action.name} is not detected; move {d}, where the view looks most related", MoveToDirection(d)
        return f"plan step {executed + 1}: {serialize(action)}", action

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
        failed = feedback.action
        planned = plan[executed] if executed < len(plan) else Stop()
        substitute = failed != planned
        rest = plan.actions[executed:] if substitute else plan.actions[executed + 1 :]

        banned = history.failed_targets() if history is not None else set()
        if isinstance(failed, (MoveToObject, MoveToRoom)):
            cand = self._perceived_synonym(failed.name, parsed, scene, banned | {failed.name})
            if cand is not None:
                return Plan((MoveToObject(cand),) + rest)
            d = self.best_direction(failed.name, scene, _recent_failed_directions(history))
            retry = () if substitute else (failed,)
            return Plan((MoveToDirection(d),) + retry + rest)

        if isinstance(failed, MoveToDirection):
            target = planned.name if isinstance(planned, (MoveToObject, MoveToRoom)) else None
            if substitute and target is not None and not _perceived(target, scene):
                cand = self._perceived_synonym(target, parsed, scene, banned | {target})
                if cand is not None:
                    return Plan((MoveToObject(cand),) + plan.actions[executed + 1 :])
            exclude = {failed.direction} | _recent_failed_directions(history)
            d = self.best_direction(target, scene, exclude)
            return Plan((MoveToDirection(d),) + rest)

        return Plan(rest) if rest else Plan((Stop(),))

    def _perceived_synonym(self, name, parsed, scene, banned) -> str | None:
        for cand in self._synonyms(name, parsed):
            if cand not in banned and _perceived(cand, scene):
                return cand
        return None

    def _synonyms(self, name: str, parsed: ParsedInstruction) -> list[str]:
        out = list(self.lexicon.get(name, ()))
        goals = list(parsed.goal_categories)
        if name in goals:
            for g in goals[goals.index(name) + 1 :]:
                out.append(g)
                out.extend(self.lexicon.get(g, ()))
        for key in sorted(self.lexicon):
            if name in self.lexicon[key]:
                out.extend(self.lexicon[key])
        return [c for c in _dedupe(out) if c != name]

    # ------------------------------------------------------------ review

    def review_action(self, thought: str, action: GlobalAction, scene: SceneDescription) -> tuple[str, GlobalAction]:
        if not isinstance(action, MoveToDirection):
            return thought, action
        options = [
            d
            for d in scene.detections_in(action.direction)
            if d.kind == "object" and d.category in CONTAINERS and d.range > REVIEW_MIN_RANGE_M
        ]
        if not options:
            return thought, action
        best = min(options, key=lambda d: (d.range, d.category, d.source_id))
        return f"the target may be on or in the {best.category}; check the {best.category} first", MoveToObject(best.category)


def _perceived(name: str, scene: SceneDescription) -> bool:
    return bool(scene.detected(name)) or any(name in tags for tags in scene.tags.values())


def _recent_failed_directions(history: TrajectoryHistory | None) -> set[str]:
    return set() if history is None else history.failed_directions()
