"""Connections to an episode server speaking the newline-JSON wire protocol.

Two transports are supported: TCP sockets (one episode per connection) and
a child process's standard streams (sequential episodes on one stream).
``spawn_socket_server`` launches a server command and reads its stderr
banner to learn the bound port, so ephemeral ports (``socket:0``) work.
"""

from __future__ import annotations

import json
import re
import shlex
import socket
import subprocess
import threading
import time

from .errors import TransportError

_BANNER = re.compile(r"listening on ([0-9.]+):(\d+)")


class Endpoint:
    """One side of a newline-JSON conversation."""

    def __init__(self, reader, writer, on_close=None):
        self._reader = reader
        self._writer = writer
        self._on_close = on_close
        self._closed = False

    def send(self, message: dict) -> None:
        try:
            self._writer.write(json.dumps(message, separators=(",", ":")) + "\n")
            self._writer.flush()
        except (BrokenPipeError, OSError) as exc:
            raise TransportError(f"connection closed while sending: {exc}") from exc

    def recv(self) -> dict:
        line = self._reader.readline()
        if not line:
            raise TransportError("connection closed by server")
        try:
            message = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TransportError(f"bad line from server: {exc}") from exc
        if not isinstance(message, dict):
            raise TransportError("server sent a non-object line")
        return message

    def init(self, model: str | None = None, puzzle_id: str | None = None) -> dict:
        """Open an episode; returns the init payload (prompts, budget, pricing)."""
        request: dict = {"type": "init"}
        if model is not None:
            request["model"] = model
        if puzzle_id is not None:
            request["puzzle_id"] = puzzle_id
        self.send(request)
        reply = self.recv()
        if reply.get("type") == "error":
            raise TransportError(f"server rejected init: {reply.get('detail')}")
        if reply.get("type") != "init":
            raise TransportError(f"expected init reply, got {reply.get('type')!r}")
        return reply

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        for stream in (self._writer, self._reader):
            try:
                stream.close()
            except OSError:
                pass
        if self._on_close is not None:
            self._on_close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def connect(host: str, port: int, attempts: int = 20, delay: float = 0.05) -> Endpoint:
    """Open a socket endpoint, retrying briefly while the server starts up."""
    last: Exception | None = None
    for _ in range(attempts):
        try:
            sock = socket.create_connection((host, port))
        except ConnectionRefusedError as exc:
            last = exc
            time.sleep(delay)
            continue
        reader = sock.makefile("r", encoding="utf-8")
        writer = sock.makefile("w", encoding="utf-8")
        return Endpoint(reader, writer, on_close=sock.close)
    raise TransportError(f"could not connect to {host}:{port}: {last}")


class ServerProcess:
    """A spawned episode server bound to a known host and port."""

    def __init__(self, proc: subprocess.Popen, host: str, port: int):
        self.proc = proc
        self.host = host
        self.port = port
        self.stderr_lines: list[str] = []
        self._drain = threading.Thread(target=self._drain_stderr, daemon=True)
        self._drain.start()

    def _drain_stderr(self) -> None:
        for line in self.proc.stderr:
            self.stderr_lines.append(line.rstrip("\n"))

    def connect(self) -> Endpoint:
        return connect(self.host, self.port)

    def wait(self, timeout: float | None = None) -> int:
        code = self.proc.wait(timeout=timeout)
        self._drain.join(timeout=5)
        return code

    def terminate(self) -> None:
        if self.proc.poll() is None:
            self.proc.terminate()
            try:
                self.proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.terminate()


def spawn_socket_server(cmd, timeout: float = 15.0) -> ServerProcess:
    """Launch a socket-mode server command and parse its listening banner."""
    if isinstance(cmd, str):
        cmd = shlex.split(cmd)
    proc = subprocess.Popen(
        cmd, stderr=subprocess.PIPE, stdout=subprocess.DEVNULL, text=True
    )
    deadline = time.monotonic() + timeout
    seen: list[str] = []
    while time.monotonic() < deadline:
        line = proc.stderr.readline()
        if not line:
            break
        seen.append(line.rstrip("\n"))
        match = _BANNER.search(line)
        if match:
            server = ServerProcess(proc, match.group(1), int(match.group(2)))
            server.stderr_lines[:0] = seen
            return server
    proc.terminate()
    proc.wait()
    raise TransportError(
        "server did not announce a listening port; stderr was: " + " | ".join(seen)
    )


class StdioServer:
    """A spawned stdio-mode server; episodes run sequentially on one stream."""

    def __init__(self, cmd):
        if isinstance(cmd, str):
            cmd = shlex.split(cmd)
        self.proc = subprocess.Popen(
            cmd,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            text=True,
        )
        self.endpoint = Endpoint(self.proc.stdout, self.proc.stdin)

    def close(self, timeout: float = 10.0) -> int:
        self.endpoint.close()
        try:
            return self.proc.wait(timeout=timeout)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            return self.proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
