"""Wire transport for external agents: stdio or a local socket.

Messages are newline-delimited JSON objects typed init / agent_msg /
env_msg / final.  The client opens with an init (optionally naming a
puzzle id and a model label); the server replies with the full init
payload (rendered prompts, visible clues, env settings), then answers
each agent_msg with an env_msg until the episode ends with a final
message carrying the complete EpisodeRecord.  Sockets play one episode
per connection; the single stdio stream plays episodes sequentially.
"""

from __future__ import annotations

import json
import socket
import sys
import threading

from .core import PROTOCOL_VERSION
from .environment import create_session
from .protocol import build_init, episode_step, finalize_record, render_response_text


class EpisodeServer:
    """Plays dataset episodes for remote clients; safe for concurrent use."""

    def __init__(self, puzzles, make_config, records_out=None, agent_label="external"):
        self.puzzles = {p.id: p for p in puzzles}
        self.order = [p.id for p in puzzles]
        self.make_config = make_config
        self.records_out = records_out
        self.agent_label = agent_label
        self.records: list[dict] = []
        self._next = 0
        self._assign_lock = threading.Lock()
        self._write_lock = threading.Lock()

    def next_puzzle(self, puzzle_id=None):
        with self._assign_lock:
            if puzzle_id is not None:
                return self.puzzles.get(puzzle_id)
            if self._next >= len(self.order):
                return None
            pid = self.order[self._next]
            self._next += 1
            return self.puzzles[pid]

    def write_record(self, record: dict) -> None:
        with self._write_lock:
            self.records.append(record)
            if self.records_out:
                with open(self.records_out, "a", encoding="utf-8") as handle:
                    handle.write(json.dumps(record, separators=(",", ":")) + "\n")

    def record_fault(self, puzzle, detail: str, reason: str) -> dict:
        config = self.make_config(puzzle)
        session = create_session(puzzle, config)
        session.mark_fault(detail, reason=reason)
        record = finalize_record(session, self.agent_label)
        self.write_record(record)
        return record

    def play(self, recv, send) -> bool:
        """One episode over a line stream; False when the stream is done."""
        line = recv()
        if line is None:
            return False
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            send({"protocol_version": PROTOCOL_VERSION, "type": "error", "detail": f"bad init line: {exc}"})
            return True
        if not isinstance(msg, dict) or msg.get("type") != "init":
            send({"protocol_version": PROTOCOL_VERSION, "type": "error", "detail": "expected an init message"})
            return True
        puzzle = self.next_puzzle(msg.get("puzzle_id"))
        if puzzle is None:
            send({"protocol_version": PROTOCOL_VERSION, "type": "error", "detail": "no puzzle available"})
            return False
        model = msg.get("model")
        config = self.make_config(puzzle)
        session = create_session(puzzle, config)
        send(build_init(puzzle, config, model=model))

        last_response = None
        while session.status == "running":
            if session.turn >= config.max_turns:
                session.mark_exhausted()
                break
            line = recv()
            if line is None:
                session.mark_fault("client disconnected mid-episode", reason="disconnect")
                break
            try:
                amsg = json.loads(line)
            except json.JSONDecodeError as exc:
                send({"protocol_version": PROTOCOL_VERSION, "type": "error", "detail": f"bad message line: {exc}"})
                continue
            if not isinstance(amsg, dict) or amsg.get("type") != "agent_msg" or not isinstance(amsg.get("text"), str):
                send({"protocol_version": PROTOCOL_VERSION, "type": "error", "detail": "expected an agent_msg with text"})
                continue
            response, _parsed = episode_step(session, amsg["text"], amsg.get("reported_tokens"))
            last_response = response
            if session.status == "running":
                send(
                    {
                        "protocol_version": PROTOCOL_VERSION,
                        "type": "env_msg",
                        "text": render_response_text(response),
                        "response": response,
                    }
                )

        record = finalize_record(session, self.agent_label, model=model)
        self.write_record(record)
        final = {
            "protocol_version": PROTOCOL_VERSION,
            "type": "final",
            "text": render_response_text(last_response) if last_response else None,
            "response": last_response,
            "record": record,
        }
        try:
            send(final)
        except (BrokenPipeError, OSError):
            pass  # the client may already be gone
        return True


def serve_stdio(server: EpisodeServer, stdin=None, stdout=None) -> int:
    """Sequential episodes over standard streams; returns episodes played."""
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout

    def recv():
        line = stdin.readline()
        if not line:
            return None
        line = line.strip()
        return line if line else recv()

    def send(message: dict) -> None:
        stdout.write(json.dumps(message, separators=(",", ":")) + "\n")
        stdout.flush()

    played = 0
    while server.play(recv, send):
        played += 1
    return played


def _handle_connection(server: EpisodeServer, conn: socket.socket) -> None:
    with conn:
        reader = conn.makefile("r", encoding="utf-8")
        writer = conn.makefile("w", encoding="utf-8")

        def recv():
            line = reader.readline()
            if not line:
                return None
            line = line.strip()
            return line if line else recv()

        def send(message: dict) -> None:
            writer.write(json.dumps(message, separators=(",", ":")) + "\n")
            writer.flush()

        server.play(recv, send)


def serve_socket(server: EpisodeServer, port: int, host: str = "127.0.0.1",
                 episodes: int | None = None, accept_timeout: float | None = None,
                 on_timeout=None, ready=None) -> int:
    """One episode per connection; returns the number of episodes started.

    `episodes` bounds how many connections to accept (None = all dataset
    records).  On an accept timeout the on_timeout callback decides
    whether to keep waiting (it returns True to continue).
    """
    target = episodes if episodes is not None else len(server.order)
    started = 0
    threads = []
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as listener:
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind((host, port))
        listener.listen()
        if accept_timeout is not None:
            listener.settimeout(accept_timeout)
        if ready is not None:
            ready(listener.getsockname()[1])
        while started < target:
            try:
                conn, _addr = listener.accept()
            except socket.timeout:
                if on_timeout is not None and on_timeout():
                    continue
                break
            thread = threading.Thread(target=_handle_connection, args=(server, conn), daemon=True)
            thread.start()
            threads.append(thread)
            started += 1
        for thread in threads:
            thread.join()
    return started
