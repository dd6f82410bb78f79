"""Global-action grammar: ``move_to_object(o)``, ``move_to_room(r)``,
``move_to_direction(d)`` and ``stop()``.

Parsing is prose tolerant: the first grammar match anywhere in the text wins,
so model output that wraps an action in reasoning still parses.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Iterator, Union

from .geometry import DIRECTIONS

log = logging.getLogger(__name__)

_FORBIDDEN_NAME_CHARS = set("()\"'`")


class ActionParseError(ValueError):
    pass


class NoActionFound(ActionParseError):
    pass


class InvalidDirection(ActionParseError):
    def __init__(self, arg: str):
        super().__init__(f"invalid direction {arg!r}; expected one of {', '.join(DIRECTIONS)}")
        self.arg = arg


def _check_name(name: str) -> None:
    if not name or name != " ".join(name.split()) or name != name.lower():
        raise ValueError(f"action argument must be non-empty, lowercase, single-spaced: {name!r}")
    if any(ch in _FORBIDDEN_NAME_CHARS for ch in name):
        raise ValueError(f"action argument may not contain parentheses or quotes: {name!r}")


@dataclass(frozen=True)
class MoveToObject:
    name: str

    def __post_init__(self):
        _check_name(self.name)


@dataclass(frozen=True)
class MoveToRoom:
    name: str

    def __post_init__(self):
        _check_name(self.name)


@dataclass(frozen=True)
class MoveToDirection:
    direction: str

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise InvalidDirection(self.direction)


@dataclass(frozen=True)
class Stop:
    pass


GlobalAction = Union[MoveToObject, MoveToRoom, MoveToDirection, Stop]


def target_name(action: GlobalAction) -> str | None:
    if isinstance(action, (MoveToObject, MoveToRoom)):
        return action.name
    return None


@dataclass(frozen=True)
class Plan:
    """Ordered global actions; a Stop may only appear last."""

    actions: tuple[GlobalAction, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(self.actions))
        for i, a in enumerate(self.actions):
            if isinstance(a, Stop) and i != len(self.actions) - 1:
                raise ValueError("stop() may only appear as the final plan action")

    def __len__(self) -> int:
        return len(self.actions)

    def __iter__(self) -> Iterator[GlobalAction]:
        return iter(self.actions)

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return Plan(self.actions[idx])
        return self.actions[idx]

    def __add__(self, other: "Plan") -> "Plan":
        return Plan(self.actions + tuple(other))

    def serialize(self) -> list[str]:
        return [serialize(a) for a in self.actions]

    def render(self) -> str:
        return "\n".join(f"{i + 1}. {s}" for i, s in enumerate(self.serialize()))


_ACTION_RE = re.compile(
    r"\b(?P<verb>move_to_object|move_to_room|move_to_direction)\s*\(\s*(?P<arg>[^()]*?)\s*\)"
    r"|\b(?P<stop>stop)\s*\(\s*\)",
    re.IGNORECASE,
)


def _build(match: re.Match) -> GlobalAction | None:
    if match.group("stop"):
        return Stop()
    verb = match.group("verb").lower()
    arg = " ".join(match.group("arg").split()).strip("\"'` ").lower()
    if not arg:
        return None
    if verb == "move_to_direction":
        if arg not in DIRECTIONS:
            raise InvalidDirection(arg)
        return MoveToDirection(arg)
    if any(ch in _FORBIDDEN_NAME_CHARS for ch in arg):
        return None
    return MoveToObject(arg) if verb == "move_to_object" else MoveToRoom(arg)


def parse_action(text: str) -> GlobalAction:
    """Return the first global action found in ``text``."""
    for m in _ACTION_RE.finditer(text):
        action = _build(m)
        if action is not None:
            return action
    raise NoActionFound(f"no global action in {text[:80]!r}")


def parse_plan(text: str) -> Plan:
    """All grammar matches in textual order, truncated after the first stop().

    Matches with an invalid direction are skipped.
    """
    actions: list[GlobalAction] = []
    for m in _ACTION_RE.finditer(text):
        try:
            action = _build(m)
        except InvalidDirection as exc:
            log.debug("skipping plan entry: %s", exc)
            continue
        if action is None:
            continue
        actions.append(action)
        if isinstance(action, Stop):
            break
    if not actions:
        raise NoActionFound(f"no global actions in {text[:80]!r}")
    return Plan(tuple(actions))


def serialize(action: GlobalAction) -> str:
    if isinstance(action, MoveToObject):
        return f"move_to_object({action.name})"
    if isinstance(action, MoveToRoom):
        return f"move_to_room({action.name})"
    if isinstance(action, MoveToDirection):
        return f"move_to_direction({action.direction})"
    if isinstance(action, Stop):
        return "stop()"
    raise TypeError(f"not a global action: {action!r}")


GRAMMAR_HELP = """\
Available global actions (use exactly this syntax):
  move_to_object(<object name>)   approach and stop near an object
  move_to_room(<room name>)       enter a room
  move_to_direction(<front|left|right|rear>)   move about 1.5 m in that direction
  stop()                          end the episode at the goal"""
