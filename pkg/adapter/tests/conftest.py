"""Shared fixtures for the adapter suite.

Everything here reaches the episode environment exclusively through its
published surfaces: the ``zebrasim`` command line and the newline-JSON
wire protocol. Nothing in this package imports it.
"""

from __future__ import annotations

import json
import subprocess
import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

ZEBRASIM = (sys.executable, "-m", "zebrasim")

DATASET_CONFIG = {
    "seed": 515,
    "cells": [
        {"size": "small", "n_missing": 1, "count": 2},
        {"size": "small", "n_missing": 2, "count": 2},
        {"size": "medium", "n_missing": 2, "count": 1},
    ],
}


def run_zebrasim(*args) -> subprocess.CompletedProcess:
    cmd = [*ZEBRASIM, *map(str, args)]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    assert proc.returncode == 0, f"{' '.join(cmd)} failed:\n{proc.stderr}"
    return proc


def serve_command(dataset, *, episodes: int, out=None, max_turns=None,
                  pricing=None) -> list[str]:
    """A socket-mode server command on an ephemeral port."""
    cmd = [*ZEBRASIM, "serve", "--dataset", str(dataset),
           "--transport", "socket:0", "--episodes", str(episodes)]
    if out is not None:
        cmd += ["--out", str(out)]
    if max_turns is not None:
        cmd += ["--max-turns", str(max_turns)]
    if pricing is not None:
        cmd += ["--pricing", str(pricing)]
    return cmd


def grid_solution_text(init: dict) -> str:
    """A syntactically valid solution grid built from the init payload.

    Assigns each attribute's domain values in listed order, so it grades
    without protocol violations (correctly or not).
    """
    rows = [
        [house] + [init["domain"][attr][i] for attr in init["attrs"]]
        for i, house in enumerate(init["houses"])
    ]
    payload = {"header": init["header"], "rows": rows}
    return "<solution>" + json.dumps(payload) + "</solution>"


@pytest.fixture(scope="session")
def workspace(tmp_path_factory) -> Path:
    """A generated dataset plus a scripted greedy run over it."""
    root = tmp_path_factory.mktemp("episodes")
    config = root / "config.json"
    config.write_text(json.dumps(DATASET_CONFIG), encoding="utf-8")
    run_zebrasim("generate", "--config", config, "--out", root)
    run_zebrasim("run", "--dataset", root / "dataset.jsonl",
                 "--agent", "greedy_ig", "--out", root / "direct")
    return root


@pytest.fixture(scope="session")
def dataset_path(workspace) -> Path:
    return workspace / "dataset.jsonl"


@pytest.fixture(scope="session")
def stored_records_path(workspace) -> Path:
    return workspace / "direct" / "records.jsonl"


@pytest.fixture(scope="session")
def stored_records(stored_records_path) -> list[dict]:
    lines = stored_records_path.read_text(encoding="utf-8").splitlines()
    return [json.loads(line) for line in lines]


class _ChatHandler(BaseHTTPRequestHandler):
    """Scripted /chat/completions responses; records every request."""

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        payload = json.loads(self.rfile.read(length) or b"{}")
        self.server.requests.append(
            {
                "path": self.path,
                "auth": self.headers.get("Authorization"),
                "payload": payload,
            }
        )
        if self.server.script:
            status, body = self.server.script.pop(0)
        else:
            status, body = 500, {"error": "script exhausted"}
        data = body.encode() if isinstance(body, str) else json.dumps(body).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture()
def chat_server():
    """A local HTTP server speaking the chat-completions response shape."""
    server = ThreadingHTTPServer(("127.0.0.1", 0), _ChatHandler)
    server.script = []
    server.requests = []
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    server.base_url = f"http://127.0.0.1:{server.server_address[1]}/v1"
    yield server
    server.shutdown()
    server.server_close()


def chat_reply(text: str, usage: dict | None = None) -> tuple[int, dict]:
    body = {"choices": [{"message": {"role": "assistant", "content": text}}]}
    if usage is not None:
        body["usage"] = usage
    return 200, body
