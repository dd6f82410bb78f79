"""A local OpenAI-style chat server for wire-protocol tests."""

from __future__ import annotations

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer


class MockChat:
    """``responder(body) -> (status, payload, delay)``; payload is a str (content) or raw bytes."""

    def __init__(self, responder):
        self.responder = responder
        self.requests: list[dict] = []
        self.headers: list[dict] = []
        self._lock = threading.Lock()
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def do_POST(self):
                n = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(n))
                with outer._lock:
                    outer.requests.append(body)
                    outer.headers.append(dict(self.headers))
                    if self.path != "/v1/chat/completions":
                        status, payload, delay = 404, b"not found", 0.0
                    else:
                        status, payload, delay = outer.responder(body)
                if delay:
                    time.sleep(delay)
                if isinstance(payload, str):
                    payload = json.dumps(
                        {"choices": [{"index": 0, "message": {"role": "assistant", "content": payload}}]}
                    ).encode()
                try:
                    self.send_response(status)
                    self.send_header("Content-Type", "application/json")
                    self.send_header("Content-Length", str(len(payload)))
                    self.end_headers()
                    self.wfile.write(payload)
                except (BrokenPipeError, ConnectionResetError):
                    pass

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.server.daemon_threads = True
        self.thread = threading.Thread(target=self.server.serve_forever, kwargs={"poll_interval": 0.02}, daemon=True)

    @property
    def base_url(self) -> str:
        host, port = self.server.server_address[:2]
        return f"http://{host}:{port}"

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()


def sequence(*replies):
    """Responder that plays ``replies`` in order, then repeats the last one."""
    items = list(replies)
    state = {"i": 0}

    def respond(body):
        i = min(state["i"], len(items) - 1)
        state["i"] += 1
        r = items[i]
        return r if isinstance(r, tuple) else (200, r, 0.0)

    return respond


def task_of(body) -> str:
    text = "\n".join(m["content"] for m in body["messages"])
    for marker in ("initial_plan", "next_action", "replan", "review"):
        if f"TASK: {marker}" in text:
            return marker
    return "parse"


def _section_first_line(text: str, header: str) -> str:
    lines = text.splitlines()
    i = lines.index(header)
    return lines[i + 1].split(". ", 1)[-1]


def planner_responder(goal: str):
    """A deterministic stand-in model that follows its own plan and echoes reviews."""

    def respond(body):
        text = body["messages"][-1]["content"]
        task = task_of(body)
        if task == "parse":
            reply = goal
        elif task == "initial_plan":
            reply = f"1. move_to_object({goal})\n2. stop()"
        elif task == "next_action":
            nxt = _section_first_line(text, "Remaining plan:")
            reply = f"Thought: follow the plan\nAction: {nxt}"
        elif task == "replan":
            reply = f"1. move_to_direction(front)\n2. move_to_object({goal})\n3. stop()"
        else:
            proposed = next(l for l in text.splitlines() if l.startswith("Proposed action: "))
            reply = "Thought: looks fine\nAction: " + proposed.split(": ", 1)[1]
        return 200, reply, 0.0

    return respond
