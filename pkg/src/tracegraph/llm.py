"""Chat backends, token estimation, and cost accounting for the agent loops.

Tool calling is backend-agnostic: an assistant turn carries at most one
directive, a single JSON object on its own line, {"tool": name, "args": {...}}.
Free text before the directive is reasoning. Token counts are estimates
(ceil of UTF-8 bytes / 4) unless a real tokenizer is plugged in; wall time is
recorded as zero for deterministic backends so whole runs are bit-reproducible.
"""

from __future__ import annotations

import json
import os
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

from .errors import BackendError, ProtocolError

ENV_URL = "TRACEGRAPH_LLM_URL"
ENV_MODEL = "TRACEGRAPH_LLM_MODEL"
ENV_KEY = "TRACEGRAPH_LLM_KEY"

MAX_ATTEMPTS = 3


@dataclass
class ChatTurn:
    role: str  # system | user | assistant | tool
    content: str
    tool_name: Optional[str] = None


@dataclass
class ToolCall:
    tool: str
    args: dict[str, str]


@dataclass
class CostMeter:
    input_tokens: int = 0
    output_tokens: int = 0
    wall_time: float = 0.0  # seconds

    @property
    def total_tokens(self) -> int:
        return self.input_tokens + self.output_tokens


def estimate_tokens(text: str) -> int:
    """ceil(utf8_bytes / 4); the default, replaceable estimator."""
    n = len(text.encode("utf-8"))
    return -(-n // 4)


class Backend(Protocol):
    name: str
    deterministic: bool

    def complete(self, turns: Sequence[ChatTurn], temperature: float,
                 tools_schema: Optional[list[dict]] = None) -> ChatTurn: ...


@dataclass
class ScriptedBackend:
    """Replays a fixed list of assistant responses; raises when exhausted."""

    responses: list[str]
    name: str = "scripted"
    deterministic: bool = True
    _cursor: int = field(default=0, repr=False)

    def complete(self, turns: Sequence[ChatTurn], temperature: float,
                 tools_schema: Optional[list[dict]] = None) -> ChatTurn:
        if self._cursor >= len(self.responses):
            raise BackendError("scripted backend exhausted its responses", retryable=False)
        content = self.responses[self._cursor]
        self._cursor += 1
        return ChatTurn(role="assistant", content=content)


class HttpBackend:
    """Chat-completions over HTTP: POST {model, messages, temperature}."""

    name = "http"
    deterministic = False

    def __init__(self, url: Optional[str] = None, model: Optional[str] = None,
                 api_key: Optional[str] = None, timeout: float = 120.0):
        self.url = url or os.environ.get(ENV_URL, "")
        self.model = model or os.environ.get(ENV_MODEL, "")
        self.api_key = api_key if api_key is not None else os.environ.get(ENV_KEY, "")
        self.timeout = timeout
        if not self.url:
            raise BackendError(f"no backend URL ({ENV_URL} unset)", retryable=False)

    def complete(self, turns: Sequence[ChatTurn], temperature: float,
                 tools_schema: Optional[list[dict]] = None) -> ChatTurn:
        payload = json.dumps({
            "model": self.model,
            "messages": [{"role": t.role, "content": t.content} for t in turns],
            "temperature": temperature,
        }).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        req = urllib.request.Request(self.url, data=payload, headers=headers)
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                body = json.loads(resp.read().decode("utf-8"))
        except urllib.error.HTTPError as exc:
            retryable = exc.code == 429 or exc.code >= 500
            raise BackendError(f"backend HTTP {exc.code}", retryable=retryable) from None
        except OSError as exc:
            raise BackendError(f"backend transport failure: {exc}", retryable=True) from None
        except json.JSONDecodeError:
            raise BackendError("backend returned non-JSON body", retryable=False) from None
        try:
            content = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise BackendError("backend response missing choices[0].message.content",
                               retryable=False) from None
        return ChatTurn(role="assistant", content=str(content))


def complete_with_meter(backend: Backend, turns: Sequence[ChatTurn], temperature: float,
                        tools_schema: Optional[list[dict]], meter: CostMeter,
                        backoff: float = 0.1) -> ChatTurn:
    """One backend call with retries; every attempt's tokens are billed."""
    attempt = 0
    while True:
        attempt += 1
        meter.input_tokens += sum(estimate_tokens(t.content) for t in turns)
        started = time.monotonic()
        try:
            reply = backend.complete(turns, temperature, tools_schema)
        except BackendError as exc:
            if not backend.deterministic:
                meter.wall_time += time.monotonic() - started
            if exc.retryable and attempt < MAX_ATTEMPTS:
                if backoff > 0:
                    time.sleep(backoff * (2 ** (attempt - 1)))
                continue
            raise
        if not backend.deterministic:
            meter.wall_time += time.monotonic() - started
        meter.output_tokens += estimate_tokens(reply.content)
        return reply


def parse_tool_call(content: str) -> Optional[ToolCall]:
    """Extract the directive from an assistant turn: the last JSON-object line
    carrying a "tool" key. Returns None when no directive is present."""
    found: Optional[ToolCall] = None
    for line in content.splitlines():
        line = line.strip()
        if not (line.startswith("{") and line.endswith("}")):
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            continue
        if not isinstance(obj, dict) or "tool" not in obj:
            continue
        tool = obj["tool"]
        args = obj.get("args", {})
        if not isinstance(tool, str) or not isinstance(args, dict):
            raise ProtocolError("tool directive must have a string tool and object args")
        found = ToolCall(tool=tool, args={str(k): str(v) for k, v in args.items()})
    return found


def directive(tool: str, **args: object) -> str:
    """Render a tool directive line (the inverse of parse_tool_call)."""
    return json.dumps({"tool": tool, "args": {k: str(v) for k, v in args.items()}},
                      ensure_ascii=False)
