"""Expert roles (instruction parser, planner, decision reviewer) behind one interface."""

from __future__ import annotations

from typing import Mapping, Sequence, Union

from .base import (
    BackendFailure,
    ChatMessage,
    EmptyParse,
    ParsedInstruction,
    PlanExhausted,
    RemoteBackend,
    ScriptedBackend,
)
from .chat import ChatClient, ChatTimeout, ChatTransportError, MalformedResponse, chat_completion
from .remote import RemoteExpert
from .scripted import CONTAINERS, ScriptedExpert

Expert = Union[ScriptedExpert, RemoteExpert]
ExpertBackend = Union[ScriptedBackend, RemoteBackend]


def build_expert(backend: ExpertBackend, lexicon: Mapping[str, Sequence[str]], seed: int | None = None, client=None) -> Expert:
    if isinstance(backend, ScriptedBackend):
        return ScriptedExpert(lexicon, backend.seed if seed is None else seed)
    if isinstance(backend, RemoteBackend):
        return RemoteExpert(backend, lexicon, seed or 0, client=client)
    raise TypeError(f"unknown expert backend {backend!r}")


__all__ = [
    "BackendFailure",
    "CONTAINERS",
    "ChatClient",
    "ChatMessage",
    "ChatTimeout",
    "ChatTransportError",
    "EmptyParse",
    "Expert",
    "ExpertBackend",
    "MalformedResponse",
    "ParsedInstruction",
    "PlanExhausted",
    "RemoteBackend",
    "RemoteExpert",
    "ScriptedBackend",
    "ScriptedExpert",
    "build_expert",
    "chat_completion",
]
