from __future__ import annotations

import os
from dataclasses import dataclass, field


class BackendFailure(RuntimeError):
    """An expert backend could not produce a usable answer."""


class EmptyParse(ValueError):
    """No goal or landmark could be recognised in the instruction."""


class PlanExhausted(IndexError):
    """The plan pointer ran past the last action."""


@dataclass(frozen=True)
class ParsedInstruction:
    goal_categories: tuple[str, ...]
    landmark_categories: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "goal_categories", tuple(self.goal_categories))
        object.__setattr__(self, "landmark_categories", tuple(self.landmark_categories))
        if not self.goal_categories:
            raise EmptyParse("parsed instruction has no goal")


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ("system", "user", "assistant"):
            raise ValueError(f"invalid chat role {self.role!r}")

    def to_dict(self) -> dict:
        return {"role": self.role, "content": self.content}


@dataclass(frozen=True)
class ScriptedBackend:
    seed: int = 0


@dataclass(frozen=True)
class RemoteBackend:
    base_url: str
    model: str
    api_key: str | None = None
    temperature: float = 0.0
    max_retries: int = 3
    timeout: float = 30.0
    backoff_base: float = 0.5
    max_in_flight: int = 4
    extra_headers: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")

    @classmethod
    def from_env(cls, **overrides) -> "RemoteBackend":
        """Read CORNAV_LLM_BASE_URL / _API_KEY / _MODEL; non-None overrides win."""
        values = {
            "base_url": os.environ.get("CORNAV_LLM_BASE_URL"),
            "api_key": os.environ.get("CORNAV_LLM_API_KEY"),
            "model": os.environ.get("CORNAV_LLM_MODEL"),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        if not values.get("base_url"):
            raise ValueError("remote backend needs a base URL (CORNAV_LLM_BASE_URL or --llm-base-url)")
        if not values.get("model"):
            raise ValueError("remote backend needs a model name (CORNAV_LLM_MODEL or --llm-model)")
        return cls(**values)
