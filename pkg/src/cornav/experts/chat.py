"""Minimal OpenAI-style chat-completion client with retry and backoff."""

from __future__ import annotations

import logging
import threading
import time
from typing import Sequence

import httpx

from .base import BackendFailure, ChatMessage, RemoteBackend

log = logging.getLogger(__name__)


class ChatTimeout(BackendFailure):
    pass


class ChatTransportError(BackendFailure):
    pass


class MalformedResponse(BackendFailure):
    pass


class ChatClient:
    """One HTTP client per backend; bounds in-flight requests across threads."""

    def __init__(self, backend: RemoteBackend, transport: httpx.BaseTransport | None = None, sleep=time.sleep):
        self.backend = backend
        self._sem = threading.BoundedSemaphore(backend.max_in_flight)
        self._http = httpx.Client(timeout=backend.timeout, transport=transport)
        self._sleep = sleep
        self.requests = 0

    def close(self) -> None:
        self._http.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    @property
    def url(self) -> str:
        return self.backend.base_url.rstrip("/") + "/v1/chat/completions"

    def complete(self, messages: Sequence[ChatMessage]) -> str:
        if not messages:
            raise ValueError("chat_completion needs at least one message")
        b = self.backend
        body = {
            "model": b.model,
            "messages": [m.to_dict() for m in messages],
            "temperature": b.temperature,
        }
        headers = {"Content-Type": "application/json", **b.extra_headers}
        if b.api_key:
            headers["Authorization"] = f"Bearer {b.api_key}"

        last: BackendFailure | None = None
        for attempt in range(b.max_retries + 1):
            if attempt:
                delay = b.backoff_base * 2 ** (attempt - 1)
                log.warning("chat request failed (%s); retry %d/%d in %.2fs", last, attempt, b.max_retries, delay)
                self._sleep(delay)
            try:
                with self._sem:
                    self.requests += 1
                    resp = self._http.post(self.url, json=body, headers=headers)
            except httpx.TimeoutException as exc:
                last = ChatTimeout(f"request timed out after {b.timeout}s")
                last.__cause__ = exc
                continue
            except httpx.TransportError as exc:
                last = ChatTransportError(f"transport error: {exc}")
                last.__cause__ = exc
                continue
            if resp.status_code >= 500:
                last = ChatTransportError(f"server error HTTP {resp.status_code}")
                continue
            if resp.status_code >= 400:
                raise ChatTransportError(f"request rejected with HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                content = resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise MalformedResponse(f"unexpected response body: {resp.text[:200]!r}") from exc
            if not isinstance(content, str):
                raise MalformedResponse("choices[0].message.content is not a string")
            return content
        assert last is not None
        raise last


def chat_completion(messages: Sequence[ChatMessage], backend: RemoteBackend, client: ChatClient | None = None) -> str:
    """Send one chat request and return the first choice's content."""
    if client is not None:
        return client.complete(messages)
    with ChatClient(backend) as c:
        return c.complete(messages)
