"""Uniform completion interface over live HTTP chat providers and scripts.

One Gateway instance serves all agent roles. Each role maps to a backend
plus model name; the scripted backend makes every pipeline runnable offline
and deterministic. Usage metering is per role and thread-safe.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import httpx

from .errors import (
    BackendUnavailable,
    EmptyResponse,
    RoleNotConfigured,
    ScriptMatchError,
    TransportFailure,
)
from .model import ReasoningTrace, TraceStage


class AgentRole(str, Enum):
    ROUTER = "Router"
    KNOWLEDGE_EXTRACTOR = "KnowledgeExtractor"
    KNOWLEDGE_MANAGER = "KnowledgeManager"
    SUMMARY = "Summary"
    VERIFIER = "Verifier"


class Speaker(str, Enum):
    SYSTEM = "System"
    USER = "User"
    ASSISTANT = "Assistant"


@dataclass(frozen=True)
class ChatMessage:
    speaker: Speaker
    text: str


@dataclass(frozen=True)
class ChatRequest:
    role: AgentRole
    messages: tuple[ChatMessage, ...]
    temperature: float = 0.0
    max_tokens: int = 2048
    request_id: str = ""

    def __post_init__(self):
        if not any(m.speaker is Speaker.USER for m in self.messages):
            raise ValueError("ChatRequest needs at least one User message")

    @property
    def full_text(self) -> str:
        return "\n".join(m.text for m in self.messages)


@dataclass(frozen=True)
class ChatResponse:
    text: str
    prompt_tokens: int
    completion_tokens: int
    backend_id: str
    latency_ms: int = 0
    attempts: int = 1


@dataclass
class ScriptRule:
    """One scripted reply: role/substring predicates plus a remaining-use count."""

    response: str
    role: AgentRole | None = None
    contains: tuple[str, ...] = ()
    prompt_tokens: int = 0
    completion_tokens: int = 0
    times: int | None = 1  # None means unlimited

    def matches(self, request: ChatRequest) -> bool:
        if self.role is not None and request.role is not self.role:
            return False
        text = request.full_text
        return all(needle in text for needle in self.contains)


class Script:
    """Deterministic replay: first unconsumed rule in declaration order wins."""

    def __init__(self, rules: list[ScriptRule]):
        self._rules = rules
        self._remaining = [r.times for r in rules]
        self._lock = threading.Lock()

    def reply(self, request: ChatRequest) -> ScriptRule:
        with self._lock:
            for i, rule in enumerate(self._rules):
                if self._remaining[i] == 0:
                    continue
                if rule.matches(request):
                    if self._remaining[i] is not None:
                        self._remaining[i] -= 1
                    return rule
        raise ScriptMatchError(
            f"no script rule matches role={request.role.value} text={request.full_text[:120]!r}"
        )

    @staticmethod
    def from_file(path: str | Path) -> "Script":
        """Load a script file: JSON list of rule objects.

        Fields: role, contains:[...], response, prompt_tokens,
        completion_tokens, times (int or "inf").
        """
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        rules = []
        for entry in data:
            times = entry.get("times", 1)
            rules.append(
                ScriptRule(
                    response=entry["response"],
                    role=AgentRole(entry["role"]) if entry.get("role") else None,
                    contains=tuple(entry.get("contains", [])),
                    prompt_tokens=int(entry.get("prompt_tokens", 0)),
                    completion_tokens=int(entry.get("completion_tokens", 0)),
                    times=None if times == "inf" else int(times),
                )
            )
        return Script(rules)


class ScriptedBackend:
    """Offline backend replaying a Script with synthetic usage numbers."""

    def __init__(self, script: Script, backend_id: str = "script"):
        self.script = script
        self.backend_id = backend_id

    def complete(self, request: ChatRequest, model: str) -> ChatResponse:
        rule = self.script.reply(request)
        return ChatResponse(
            text=rule.response,
            prompt_tokens=rule.prompt_tokens,
            completion_tokens=rule.completion_tokens,
            backend_id=self.backend_id,
            latency_ms=0,
        )


_WIRE_SPEAKER = {Speaker.SYSTEM: "system", Speaker.USER: "user", Speaker.ASSISTANT: "assistant"}


class HttpChatBackend:
    """Generic HTTP chat-completion client.

    Sends {model, messages, temperature, max_tokens} to the configured URL
    and reads choices[0].message.content plus usage from the reply. The API
    key comes from the environment variable named in ``key_env``
    (HYGIEIA_BACKEND_<NAME>_KEY by convention).
    """

    def __init__(
        self,
        backend_id: str,
        url: str,
        key_env: str | None = None,
        timeout_s: float = 60.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.backend_id = backend_id
        self.url = url
        self.key_env = key_env
        self._client = httpx.Client(timeout=timeout_s, transport=transport)

    def complete(self, request: ChatRequest, model: str) -> ChatResponse:
        headers = {}
        if self.key_env:
            key = os.environ.get(self.key_env)
            if key:
                headers["Authorization"] = f"Bearer {key}"
        body = {
            "model": model,
            "messages": [{"role": _WIRE_SPEAKER[m.speaker], "content": m.text} for m in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        started = time.monotonic()
        try:
            resp = self._client.post(self.url, json=body, headers=headers)
        except httpx.HTTPError as exc:
            raise TransportFailure(f"{self.backend_id}: {exc}") from exc
        latency = int((time.monotonic() - started) * 1000)
        if resp.status_code >= 500:
            raise TransportFailure(f"{self.backend_id}: HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise BackendUnavailable(f"{self.backend_id}: HTTP {resp.status_code}: {resp.text[:200]}")
        payload = resp.json()
        try:
            text = payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendUnavailable(f"{self.backend_id}: malformed completion payload") from exc
        usage = payload.get("usage") or {}
        return ChatResponse(
            text=text or "",
            prompt_tokens=int(usage.get("prompt_tokens", 0)),
            completion_tokens=int(usage.get("completion_tokens", 0)),
            backend_id=self.backend_id,
            latency_ms=latency,
        )


@dataclass
class RoleUsage:
    calls: int = 0
    prompt_tokens: int = 0
    completion_tokens: int = 0

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.calls, self.prompt_tokens, self.completion_tokens)

    def to_dict(self) -> dict:
        return {
            "calls": self.calls,
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
        }


@dataclass(frozen=True)
class RoleBinding:
    backend: object  # anything with complete(request, model) -> ChatResponse
    model: str


_STAGE_FOR_ROLE = {
    AgentRole.KNOWLEDGE_EXTRACTOR: TraceStage.EXTRACT,
    AgentRole.KNOWLEDGE_MANAGER: TraceStage.MANAGE,
    AgentRole.SUMMARY: TraceStage.SUMMARIZE,
    AgentRole.VERIFIER: TraceStage.VERIFY,
    AgentRole.ROUTER: TraceStage.ROUTE,
}


class Gateway:
    """Routes ChatRequests to per-role backends with retries and metering."""

    def __init__(
        self,
        bindings: dict[AgentRole, RoleBinding],
        retry_limit: int = 3,
        retry_base_ms: int = 250,
    ):
        self._bindings = dict(bindings)
        self.retry_limit = retry_limit
        self.retry_base_ms = retry_base_ms
        self._usage: dict[AgentRole, RoleUsage] = {}
        self._lock = threading.Lock()

    def complete(
        self,
        request: ChatRequest,
        trace: ReasoningTrace | None = None,
        stage: TraceStage | None = None,
    ) -> ChatResponse:
        """Complete one request, recording the exchange in ``trace`` if given.

        Transient transport failures are retried with exponential backoff;
        everything else surfaces immediately.
        """
        binding = self._bindings.get(request.role)
        if binding is None:
            raise RoleNotConfigured(request.role.value)

        last_exc: Exception | None = None
        response: ChatResponse | None = None
        for attempt in range(self.retry_limit):
            try:
                response = binding.backend.complete(request, binding.model)
                response = ChatResponse(
                    text=response.text,
                    prompt_tokens=response.prompt_tokens,
                    completion_tokens=response.completion_tokens,
                    backend_id=response.backend_id,
                    latency_ms=response.latency_ms,
                    attempts=attempt + 1,
                )
                break
            except TransportFailure as exc:
                last_exc = exc
                if attempt + 1 < self.retry_limit:
                    time.sleep(self.retry_base_ms * (2**attempt) / 1000.0)
        if response is None:
            raise BackendUnavailable(
                f"role {request.role.value}: gave up after {self.retry_limit} attempts: {last_exc}"
            )
        if not response.text:
            raise EmptyResponse(f"role {request.role.value}: provider returned empty text")

        with self._lock:
            usage = self._usage.setdefault(request.role, RoleUsage())
            usage.calls += 1
            usage.prompt_tokens += response.prompt_tokens
            usage.completion_tokens += response.completion_tokens

        if trace is not None:
            trace.add(
                stage=stage or _STAGE_FOR_ROLE[request.role],
                agent_role=request.role.value,
                rendered_prompt=request.full_text,
                raw_response=response.text,
                prompt_tokens=response.prompt_tokens,
                completion_tokens=response.completion_tokens,
            )
        return response

    def usage_report(self) -> dict[AgentRole, RoleUsage]:
        """Snapshot of per-role totals since construction or the last reset."""
        with self._lock:
            return {
                role: RoleUsage(u.calls, u.prompt_tokens, u.completion_tokens)
                for role, u in self._usage.items()
            }

    def reset_usage(self) -> None:
        with self._lock:
            self._usage.clear()

    def usage_dict(self) -> dict[str, dict]:
        return {role.value: usage.to_dict() for role, usage in sorted(self.usage_report().items(), key=lambda kv: kv[0].value)}


def scripted_gateway(script: Script, retry_base_ms: int = 0) -> Gateway:
    """All five roles bound to one scripted backend; handy default for tests and CLI."""
    backend = ScriptedBackend(script)
    bindings = {role: RoleBinding(backend=backend, model="scripted") for role in AgentRole}
    return Gateway(bindings, retry_base_ms=retry_base_ms)
