"""Drive episodes: backend completions in, wire messages out.

The episode loop keeps two invariants. Environment text (system prompt,
task prompt, rendered responses) enters the conversation exactly as
received, and the model's reply text is forwarded in ``agent_msg``
exactly as produced — no trimming, tag repair, or whitespace edits.
Token counts reported by the backend are attached to the same turn they
paid for when the binding asks for ``model_reported`` accounting.
"""

from __future__ import annotations

import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .backends import BackendReply, FakeBackend, build_backend
from .bindings import ModelBinding
from .errors import AgentFault, RetryableBackendError, TransportError
from .transport import Endpoint

_USAGE_TRAILER = re.compile(r"\[Token usage: (\d+) reasoning")


class RateLimiter:
    """Global minimum spacing between backend calls, shared across threads."""

    def __init__(self, min_interval: float):
        self.min_interval = min_interval
        self._lock = threading.Lock()
        self._next_at = 0.0

    def wait(self) -> None:
        if self.min_interval <= 0:
            return
        with self._lock:
            now = time.monotonic()
            delay = self._next_at - now
            self._next_at = max(now, self._next_at) + self.min_interval
        if delay > 0:
            time.sleep(delay)


@dataclass
class EpisodeOutcome:
    """What one episode produced: the server's record plus the conversation."""

    record: dict | None
    transcript: list[dict] = field(default_factory=list)
    reported_tokens: int = 0
    fault: str | None = None

    @property
    def verdict(self) -> str:
        if self.record is None:
            return f"fault: {self.fault}"
        status = self.record.get("status")
        if status == "solved":
            return "solved" if self.record.get("accuracy") == 1 else "solved (incorrect)"
        reason = self.record.get("fail_reason")
        return f"{status} ({reason})" if reason else str(status)


def _complete_with_retry(backend, conversation, binding, retries, limiter):
    last: Exception | None = None
    for _ in range(retries + 1):
        if limiter is not None:
            limiter.wait()
        try:
            return backend.complete(conversation, binding)
        except RetryableBackendError as exc:
            last = exc
    raise AgentFault(f"backend failed after {retries + 1} attempts: {last}")


def play_episode(binding: ModelBinding, endpoint: Endpoint, init: dict,
                 backend=None, retries: int = 3, limiter: RateLimiter | None = None) -> EpisodeOutcome:
    """Run one episode to completion over an already-initialized endpoint.

    ``init`` is the payload ``endpoint.init(...)`` returned. On an
    unrecoverable backend failure the endpoint is closed (the server
    records the disconnect) and ``AgentFault`` propagates.
    """
    if backend is None:
        backend = build_backend(binding)
    conversation = [
        {"role": "system", "content": init["system_prompt"]},
        {"role": "user", "content": init["task_prompt"]},
    ]
    max_turns = init.get("max_turns")
    sent = 0
    answered = True
    reported_total = 0
    try:
        while True:
            # At the turn cap the server ends the episode unprompted, so
            # expect its final message instead of burning a backend call.
            if max_turns is None or sent < max_turns:
                reply = _complete_with_retry(backend, conversation, binding, retries, limiter)
                message: dict = {"type": "agent_msg", "text": reply.text}
                reported = reply.reported_tokens()
                if binding.token_report == "model_reported" and reported is not None:
                    message["reported_tokens"] = reported
                    reported_total += reported
                endpoint.send(message)
                conversation.append({"role": "assistant", "content": reply.text})
                sent += 1
                answered = False
            server_msg = endpoint.recv()
            kind = server_msg.get("type")
            if kind == "env_msg":
                conversation.append({"role": "user", "content": server_msg["text"]})
                answered = True
                continue
            if kind == "final":
                # A final that answers our last message carries new text;
                # after a turn-cap ending it just re-renders the response
                # the env_msg already delivered, so don't append it twice.
                if server_msg.get("text") is not None and not answered:
                    conversation.append({"role": "user", "content": server_msg["text"]})
                return EpisodeOutcome(
                    record=server_msg.get("record"),
                    transcript=conversation,
                    reported_tokens=reported_total,
                )
            if kind == "error":
                raise TransportError(f"server error: {server_msg.get('detail')}")
            raise TransportError(f"unexpected message type {kind!r}")
    except AgentFault:
        endpoint.close()
        raise


# --- transcript replay ----------------------------------------------------

_REPLAY_BINDING = ModelBinding(
    backend="fake", model="transcript-replay", token_report="estimator"
)
_REPORTED_BINDING = ModelBinding(
    backend="fake", model="transcript-replay", token_report="model_reported"
)


def _stored_turns(record: dict) -> list[dict]:
    return sorted(record.get("turns", []), key=lambda t: t["turn"])


def _replay_usages(record: dict, turns: list[dict]) -> list[int | None]:
    """Per-turn reported token counts recovered from a stored record.

    Only records whose ledger came from model-reported counts carry them;
    the cumulative reasoning total in each usage trailer is diffed back
    into per-turn values. Anything else replays with no usage attached so
    the environment re-runs its own estimator.
    """
    none: list[int | None] = [None] * len(turns)
    if record.get("ledger", {}).get("estimator") != "model_reported":
        return none
    cumulative = []
    for turn in turns:
        trailer = turn.get("response", {}).get("usage")
        match = _USAGE_TRAILER.search(trailer) if isinstance(trailer, str) else None
        if match is None:
            return none
        cumulative.append(int(match.group(1)))
    return [cur - prev for cur, prev in zip(cumulative, [0] + cumulative[:-1])]


def replay_episode(record: dict, endpoint: Endpoint) -> EpisodeOutcome:
    """Replay one stored record through a live server, turn for turn.

    The episode is requested by the stored puzzle id, each agent message is
    resent byte-for-byte, and reported token counts are reattached when the
    stored ledger used them.
    """
    turns = _stored_turns(record)
    usages = _replay_usages(record, turns)
    script = [
        BackendReply(turn["agent_text"],
                     None if reported is None else {"completion_tokens": reported})
        for turn, reported in zip(turns, usages)
    ]
    backend = FakeBackend(script)
    binding = _REPLAY_BINDING if all(u is None for u in usages) else _REPORTED_BINDING
    init = endpoint.init(model=record.get("model"), puzzle_id=record["puzzle_id"])
    return play_episode(binding, endpoint, init, backend=backend, retries=0)


def replay_records(records: list[dict], make_endpoint, jobs: int = 1) -> list[EpisodeOutcome]:
    """Replay stored records through a server; one fresh endpoint each.

    ``make_endpoint`` is called per episode (socket servers speak one
    episode per connection). Faulted outcomes carry the failure detail
    instead of a record.
    """

    def one(record: dict) -> EpisodeOutcome:
        endpoint = make_endpoint()
        try:
            return replay_episode(record, endpoint)
        except (AgentFault, TransportError) as exc:
            return EpisodeOutcome(record=None, fault=str(exc))
        finally:
            endpoint.close()

    if jobs <= 1:
        return [one(record) for record in records]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, records))


def run_episodes(binding: ModelBinding, make_endpoint, episodes: int,
                 backend_factory=None, jobs: int = 1, retries: int = 3,
                 limiter: RateLimiter | None = None) -> list[EpisodeOutcome]:
    """Play ``episodes`` fresh episodes against a server with one binding.

    ``backend_factory`` (no arguments) overrides the registry lookup —
    used to inject fakes. A shared limiter spaces backend calls globally
    across worker threads.
    """

    def one(_index: int) -> EpisodeOutcome:
        backend = backend_factory() if backend_factory is not None else build_backend(binding)
        endpoint = make_endpoint()
        try:
            init = endpoint.init(model=binding.model)
            return play_episode(binding, endpoint, init,
                                backend=backend, retries=retries, limiter=limiter)
        except (AgentFault, TransportError) as exc:
            return EpisodeOutcome(record=None, fault=str(exc))
        finally:
            endpoint.close()

    if jobs <= 1:
        return [one(i) for i in range(episodes)]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, range(episodes)))
