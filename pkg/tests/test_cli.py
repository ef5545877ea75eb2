import json
import socket
import subprocess
import sys
import threading

import pytest

from zebrasim.cli import main
from zebrasim.generator import load_dataset


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli-ds")
    config = root / "config.json"
    config.write_text(json.dumps({
        "seed": 77,
        "cells": [
            {"size": "small", "n_missing": 1, "count": 2},
            {"size": "small", "n_missing": 2, "count": 1},
        ],
    }), encoding="utf-8")
    out = root / "ds"
    assert main(["generate", "--config", str(config), "--out", str(out)]) == 0
    return out / "dataset.jsonl"


def test_generate_writes_dataset_and_manifest(dataset, capsys):
    manifest = json.loads((dataset.parent / "manifest.json").read_text())
    assert manifest["records"] == 3
    assert manifest["seed"] == 77
    puzzles = load_dataset(dataset)
    assert [p.id for p in puzzles] == ["small-m1-0000", "small-m1-0001", "small-m2-0000"]


def test_generate_bad_config_is_config_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    assert main(["generate", "--config", str(bad), "--out", str(tmp_path / "x")]) == 2
    assert "error:" in capsys.readouterr().err


def test_run_and_score_round_trip(dataset, tmp_path, capsys):
    out = tmp_path / "run"
    code = main(["run", "--dataset", str(dataset), "--agent", "greedy_ig",
                 "--seed", "3", "--out", str(out)])
    assert code == 0
    records = [json.loads(line) for line in (out / "records.jsonl").read_text().splitlines()]
    assert len(records) == 3
    assert [r["puzzle_id"] for r in records] == sorted(r["puzzle_id"] for r in records)
    assert all(r["status"] == "solved" for r in records)
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["agent"] == "greedy_ig"
    assert manifest["episodes"] == 3
    capsys.readouterr()

    score_out = tmp_path / "report"
    code = main(["score", "--records", str(out / "records.jsonl"), "--out", str(score_out)])
    assert code == 0
    printed = capsys.readouterr().out
    assert printed.splitlines()[0].startswith("size\tn_missing\tn\t")
    tsv = (score_out / "report.tsv").read_text()
    assert tsv == printed
    rows = [json.loads(line) for line in (score_out / "report.jsonl").read_text().splitlines()]
    assert {row["n_missing"] for row in rows} == {1, 2}


def test_run_jobs_parallel_matches_serial(dataset, tmp_path):
    serial = tmp_path / "serial"
    parallel = tmp_path / "parallel"
    assert main(["run", "--dataset", str(dataset), "--agent", "cheating_oracle",
                 "--seed", "5", "--out", str(serial)]) == 0
    assert main(["run", "--dataset", str(dataset), "--agent", "cheating_oracle",
                 "--seed", "5", "--jobs", "2", "--out", str(parallel)]) == 0
    assert (serial / "records.jsonl").read_text() == (parallel / "records.jsonl").read_text()


def test_run_with_budget_and_pricing_flags(dataset, tmp_path):
    out = tmp_path / "priced"
    code = main(["run", "--dataset", str(dataset), "--agent", "cheating_oracle",
                 "--budget", "tight", "--pricing", "baseline@gemini-2.5-flash",
                 "--out", str(out)])
    assert code == 0
    records = [json.loads(line) for line in (out / "records.jsonl").read_text().splitlines()]
    for record in records:
        assert record["budget_limit"] == record["k_star"]
        assert record["budget_condition"] == "tight"
        assert record["pricing"]["condition"] == "baseline"
        assert record["budget_remaining"] == 0


def test_run_unknown_agent_is_config_error(dataset, tmp_path, capsys):
    assert main(["run", "--dataset", str(dataset), "--agent", "psychic",
                 "--out", str(tmp_path / "x")]) == 2


def test_run_bad_budget_spec_is_config_error(dataset, tmp_path, capsys):
    assert main(["run", "--dataset", str(dataset), "--agent", "random",
                 "--budget", "normal", "--out", str(tmp_path / "x")]) == 2
    assert main(["run", "--dataset", str(dataset), "--agent", "random",
                 "--budget", "loose:gpt-5", "--out", str(tmp_path / "x")]) == 2
    assert main(["run", "--dataset", str(dataset), "--agent", "random",
                 "--pricing", "mystery", "--out", str(tmp_path / "x")]) == 2


def test_score_empty_records_is_error(tmp_path, capsys):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("", encoding="utf-8")
    assert main(["score", "--records", str(empty)]) == 2
    assert "no episodes" in capsys.readouterr().err


def test_score_flags_bad_lines(dataset, tmp_path, capsys):
    out = tmp_path / "run"
    main(["run", "--dataset", str(dataset), "--agent", "cheating_oracle", "--out", str(out)])
    records = out / "records.jsonl"
    with open(records, "a", encoding="utf-8") as fh:
        fh.write("garbage line\n")
    capsys.readouterr()
    code = main(["score", "--records", str(records)])
    assert code == 2
    err = capsys.readouterr().err
    assert "bad record" in err and ":4:" in err


def test_score_log_base_2(dataset, tmp_path, capsys):
    out = tmp_path / "run"
    main(["run", "--dataset", str(dataset), "--agent", "cheating_oracle", "--out", str(out)])
    capsys.readouterr()
    assert main(["score", "--records", str(out / "records.jsonl"), "--log-base", "2"]) == 0
    assert "(log base 2)" in capsys.readouterr().out


def test_run_external_timeout_writes_fault_records(dataset, tmp_path, capsys):
    out = tmp_path / "ext"
    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
    code = main(["run", "--dataset", str(dataset), "--agent", "external",
                 "--transport", f"socket:{port}", "--timeout", "0.2",
                 "--out", str(out)])
    assert code == 3
    records = [json.loads(line) for line in (out / "records.jsonl").read_text().splitlines()]
    assert len(records) == 3
    assert all(r["fail_reason"] == "timeout" for r in records)
    assert "fault" in capsys.readouterr().out


def test_run_external_with_live_client(dataset, tmp_path):
    out = tmp_path / "ext-live"
    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
    puzzles = {p.id: p for p in load_dataset(dataset)}

    def connect():
        import time
        for _ in range(100):
            try:
                return socket.create_connection(("127.0.0.1", port), timeout=10)
            except ConnectionRefusedError:
                time.sleep(0.05)
        raise AssertionError("server never came up")

    def client():
        for _ in range(3):
            with connect() as conn:
                reader = conn.makefile("r", encoding="utf-8")
                writer = conn.makefile("w", encoding="utf-8")
                writer.write(json.dumps({"type": "init", "model": "live"}) + "\n")
                writer.flush()
                init = json.loads(reader.readline())
                puzzle = puzzles[init["puzzle_id"]]
                rows = [[str(h)] + [puzzle.solution.value_at(h, a) for a in puzzle.attributes]
                        for h in range(1, puzzle.n_houses + 1)]
                sol = {"header": ["House"] + list(puzzle.attributes), "rows": rows}
                writer.write(json.dumps({
                    "type": "agent_msg",
                    "text": "<solution>" + json.dumps(sol) + "</solution>",
                }) + "\n")
                writer.flush()
                final = json.loads(reader.readline())
                assert final["type"] == "final"

    thread = threading.Thread(target=client, daemon=True)
    thread.start()
    code = main(["run", "--dataset", str(dataset), "--agent", "external",
                 "--transport", f"socket:{port}", "--timeout", "10",
                 "--out", str(out)])
    thread.join(timeout=10)
    assert code == 0
    records = [json.loads(line) for line in (out / "records.jsonl").read_text().splitlines()]
    assert len(records) == 3
    assert all(r["status"] == "solved" for r in records)
    assert all(r["model"] == "live" for r in records)


def test_cli_module_entrypoint(dataset):
    proc = subprocess.run(
        [sys.executable, "-m", "zebrasim", "score", "--records", "/nonexistent.jsonl"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 2
    proc2 = subprocess.run([sys.executable, "-m", "zebrasim", "--help"],
                           capture_output=True, text=True)
    assert proc2.returncode == 0
    assert "generate" in proc2.stdout
