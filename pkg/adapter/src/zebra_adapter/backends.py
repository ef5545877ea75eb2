"""Chat-completion backends.

A backend takes a conversation (list of ``{"role", "content"}`` turns) and
returns the model's text plus whatever token usage the service reported.
``FakeBackend`` replays a script for offline tests; ``OpenAIChatBackend``
speaks the ``/chat/completions`` HTTP shape.
"""

from __future__ import annotations

from dataclasses import dataclass

import httpx

from .bindings import ModelBinding
from .errors import BackendError, RetryableBackendError

_USAGE_KEYS = ("completion_tokens", "output_tokens")


@dataclass(frozen=True)
class BackendReply:
    """One model completion: raw text plus the service's usage object, if any."""

    text: str
    usage: dict | None = None

    def reported_tokens(self) -> int | None:
        """Completion-side token count as reported by the service, if present."""
        if self.usage is None:
            return None
        for key in _USAGE_KEYS:
            value = self.usage.get(key)
            if isinstance(value, int):
                return value
        return None


class FakeBackend:
    """Scripted backend for offline tests and transcript replay.

    ``script`` entries may be ``BackendReply``, plain strings (wrapped with
    no usage), or exception instances (raised when that position is reached,
    consuming it). Received conversations are recorded in ``calls``.
    """

    def __init__(self, script):
        self.script = list(script)
        self.calls: list[list[dict]] = []
        self._cursor = 0

    def complete(self, conversation: list[dict], binding: ModelBinding) -> BackendReply:
        self.calls.append([dict(turn) for turn in conversation])
        if self._cursor >= len(self.script):
            raise BackendError("fake backend script exhausted")
        entry = self.script[self._cursor]
        self._cursor += 1
        if isinstance(entry, Exception):
            raise entry
        if isinstance(entry, str):
            return BackendReply(entry)
        return entry


class OpenAIChatBackend:
    """POST the conversation to a ``/chat/completions`` endpoint."""

    default_base_url = "https://api.openai.com/v1"

    def __init__(self, client: httpx.Client | None = None, timeout: float = 120.0):
        self.client = client or httpx.Client(timeout=timeout)

    def complete(self, conversation: list[dict], binding: ModelBinding) -> BackendReply:
        base = (binding.base_url or self.default_base_url).rstrip("/")
        payload = {"model": binding.model, "messages": conversation, **binding.params}
        headers = {}
        credential = binding.resolve_credential()
        if credential is not None:
            headers["Authorization"] = f"Bearer {credential}"
        try:
            response = self.client.post(
                f"{base}/chat/completions", json=payload, headers=headers
            )
        except httpx.TimeoutException as exc:
            raise RetryableBackendError(f"backend timeout: {exc}") from exc
        except httpx.HTTPError as exc:
            raise RetryableBackendError(f"backend connection failed: {exc}") from exc
        if response.status_code == 429 or response.status_code >= 500:
            raise RetryableBackendError(
                f"backend returned {response.status_code}: {response.text[:200]}"
            )
        if response.status_code != 200:
            raise BackendError(
                f"backend returned {response.status_code}: {response.text[:200]}"
            )
        try:
            body = response.json()
            text = body["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"malformed backend response: {exc}") from exc
        if not isinstance(text, str):
            raise BackendError("backend message content is not text")
        usage = body.get("usage")
        if usage is not None and not isinstance(usage, dict):
            usage = None
        return BackendReply(text, usage)


REGISTRY = {"openai_chat": OpenAIChatBackend}


def build_backend(binding: ModelBinding, registry: dict | None = None):
    """Instantiate the backend a binding names."""
    table = registry if registry is not None else REGISTRY
    factory = table.get(binding.backend)
    if factory is None:
        raise BackendError(
            f"unknown backend {binding.backend!r}; known: {sorted(table)}"
        )
    return factory()
