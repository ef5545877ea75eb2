"""Command line entry point: generate, run, score, serve.

Every knob rides in named flags or declarative JSON config files, and
every command is deterministic given its inputs and seed.  Exit codes:
0 on success, 2 on configuration errors, 3 when a run finished but some
episodes recorded runtime faults.
"""

from __future__ import annotations

import argparse
import json
import os
import socket as socket_mod
import sys
from concurrent.futures import ProcessPoolExecutor

from .core import ZebraSimError
from .environment import (
    ConfigMismatch,
    EnvConfig,
    Pricing,
    UnknownCondition,
    create_session,
    price_table,
    resolve_budget,
)
from .agents import AgentSpec, build_agent
from .generator import generate_dataset, emit_dataset, load_dataset, puzzle_from_record
from .metrics import aggregate, render_table, score_records_file
from .protocol import finalize_record, run_episode
from .server import EpisodeServer, serve_socket, serve_stdio

FAULT_REASONS = ("agent_fault", "timeout", "disconnect")


class CliError(Exception):
    pass


def _parse_budget_spec(text: str):
    """'none' | integer | 'tight' | 'normal:MODEL' | 'relaxed:MODEL'."""
    text = text.strip()
    if text.lower() == "none":
        return None
    if text.lstrip("-").isdigit():
        value = int(text)
        if value < 0:
            raise CliError(f"budget must be >= 0, got {value}")
        return ("fixed", value, None)
    name, _, model = text.partition(":")
    name = name.strip().lower()
    if name not in ("tight", "normal", "relaxed"):
        raise CliError(f"unknown budget spec {text!r}")
    if name != "tight" and not model:
        raise CliError(f"budget condition {name!r} needs a model, e.g. {name}:gpt-5")
    return (name, None, model or None)


def _parse_pricing_spec(text: str):
    """'none' | 'CONDITION@SCALE' | 'CONDITION' (default scale)."""
    text = text.strip()
    if text.lower() == "none":
        return None
    condition, _, scale = text.partition("@")
    scale = scale or "gemini-2.5-flash"
    try:
        fact, relation = price_table(condition, scale)
    except UnknownCondition as exc:
        raise CliError(str(exc)) from exc
    return Pricing(fact_price=fact, relation_price=relation, condition=condition.strip().lower(), scale=scale)


def _env_config_for(puzzle, args_ns) -> tuple[EnvConfig, str | None]:
    budget = args_ns["budget"]
    budget_condition = None
    limit = None
    if budget is not None:
        mode, value, model = budget
        if mode == "fixed":
            limit = value
            budget_condition = f"fixed:{value}"
        else:
            limit = resolve_budget(mode, puzzle.k_star, puzzle.size, model)
            budget_condition = mode if model is None else f"{mode}:{model}"
    config = EnvConfig(
        env_type=args_ns["env_type"],
        budget_limit=limit,
        pricing=args_ns["pricing"],
        max_turns=args_ns["max_turns"],
    )
    return config, budget_condition


def _run_one(payload: dict) -> dict:
    """Worker for --jobs: rebuild everything from plain dicts."""
    puzzle = puzzle_from_record(payload["record"])
    args_ns = {
        "env_type": payload["env_type"],
        "budget": payload["budget"],
        "pricing": Pricing(**payload["pricing"]) if payload["pricing"] else None,
        "max_turns": payload["max_turns"],
    }
    config, budget_condition = _env_config_for(puzzle, args_ns)
    spec = AgentSpec(
        kind=payload["agent_kind"],
        seed=payload["seed"],
        candidate_policy=payload["candidate_policy"],
    )
    agent = build_agent(spec, puzzle, env_type=config.env_type)
    return run_episode(
        agent,
        puzzle,
        config,
        agent_label=payload["agent_kind"],
        budget_condition=budget_condition,
    )


def cmd_generate(args) -> int:
    with open(args.config, "r", encoding="utf-8") as handle:
        spec = json.load(handle)
    os.makedirs(args.out, exist_ok=True)
    puzzles = generate_dataset(spec)
    dataset_path = os.path.join(args.out, "dataset.jsonl")
    manifest = emit_dataset(puzzles, dataset_path)
    manifest["seed"] = spec.get("seed", 0)
    manifest["config"] = spec
    with open(os.path.join(args.out, "manifest.json"), "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")
    print(f"wrote {manifest['records']} puzzles to {dataset_path}")
    return 0


def cmd_run(args) -> int:
    puzzles = load_dataset(args.dataset)
    if not puzzles:
        raise CliError(f"dataset {args.dataset} is empty")
    budget = _parse_budget_spec(args.budget)
    pricing = _parse_pricing_spec(args.pricing)
    os.makedirs(args.out, exist_ok=True)
    records_path = os.path.join(args.out, "records.jsonl")
    args_ns = {
        "env_type": args.env,
        "budget": budget,
        "pricing": pricing,
        "max_turns": args.max_turns,
    }

    if args.agent == "external":
        records = _run_external(puzzles, args, args_ns)
    else:
        spec = AgentSpec.parse(args.agent, seed=args.seed)
        if spec.kind not in ("cheating_oracle", "greedy_ig", "random"):
            raise CliError(f"unknown agent {args.agent!r}")
        payloads = [
            {
                "record": _record_cache(puzzle),
                "env_type": args.env,
                "budget": budget,
                "pricing": pricing.to_record() if pricing else None,
                "max_turns": args.max_turns,
                "agent_kind": spec.kind,
                "seed": args.seed,
                "candidate_policy": spec.candidate_policy,
            }
            for puzzle in puzzles
        ]
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                records = list(pool.map(_run_one, payloads))
        else:
            records = [_run_one(p) for p in payloads]

    records.sort(key=lambda r: r["puzzle_id"])
    with open(records_path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, separators=(",", ":")) + "\n")

    manifest = {
        "dataset": args.dataset,
        "env_type": args.env,
        "budget": args.budget,
        "pricing": args.pricing,
        "agent": args.agent,
        "seed": args.seed,
        "jobs": args.jobs,
        "max_turns": args.max_turns,
        "records": records_path,
        "episodes": len(records),
    }
    with open(os.path.join(args.out, "run_manifest.json"), "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")

    faults = [r for r in records if r.get("fail_reason") in FAULT_REASONS]
    solved = sum(1 for r in records if r["status"] == "solved")
    print(f"{len(records)} episodes, {solved} solved, {len(faults)} faults -> {records_path}")
    if faults:
        for record in faults:
            print(f"fault: {record['puzzle_id']}: {record.get('fault')}")
        return 3
    return 0


def _record_cache(puzzle):
    from .generator import puzzle_to_record

    return puzzle_to_record(puzzle)


def _run_external(puzzles, args, args_ns) -> list:
    if not args.transport.startswith("socket:"):
        raise CliError("--agent external needs --transport socket:PORT")
    port = int(args.transport.split(":", 1)[1])

    def make_config(puzzle):
        config, _cond = _env_config_for(puzzle, args_ns)
        return config

    server = EpisodeServer(puzzles, make_config, agent_label="external")
    total = len(puzzles)
    with socket_mod.socket(socket_mod.AF_INET, socket_mod.SOCK_STREAM) as listener:
        listener.setsockopt(socket_mod.SOL_SOCKET, socket_mod.SO_REUSEADDR, 1)
        listener.bind(("127.0.0.1", port))
        listener.listen()
        listener.settimeout(args.timeout)
        while len(server.records) < total:
            try:
                conn, _addr = listener.accept()
            except socket_mod.timeout:
                puzzle = server.next_puzzle()
                if puzzle is None:
                    break
                server.record_fault(puzzle, f"no client connected within {args.timeout}s", "timeout")
                continue
            with conn:
                reader = conn.makefile("r", encoding="utf-8")
                writer = conn.makefile("w", encoding="utf-8")

                def recv():
                    line = reader.readline()
                    return line.strip() if line else None

                def send(message):
                    writer.write(json.dumps(message, separators=(",", ":")) + "\n")
                    writer.flush()

                server.play(recv, send)
    return list(server.records)


def cmd_score(args) -> int:
    episodes, problems = score_records_file(args.records, log_base=args.log_base)
    for problem in problems:
        print(f"bad record: {problem}", file=sys.stderr)
    if not episodes:
        raise CliError(f"no episodes in {args.records}")
    group_by = tuple(k.strip() for k in args.group_by.split(",") if k.strip())
    report = aggregate(episodes, group_by=group_by)
    table = render_table(report)
    print(table, end="")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "report.tsv"), "w", encoding="utf-8") as handle:
            handle.write(table)
        with open(os.path.join(args.out, "report.jsonl"), "w", encoding="utf-8") as handle:
            for row in report["rows"]:
                full = {"log_base": report["log_base"], **row}
                handle.write(json.dumps(full, separators=(",", ":")) + "\n")
    return 2 if problems else 0


def cmd_serve(args) -> int:
    puzzles = load_dataset(args.dataset)
    if not puzzles:
        raise CliError(f"dataset {args.dataset} is empty")
    budget = _parse_budget_spec(args.budget)
    pricing = _parse_pricing_spec(args.pricing)
    args_ns = {
        "env_type": args.env,
        "budget": budget,
        "pricing": pricing,
        "max_turns": args.max_turns,
    }

    def make_config(puzzle):
        config, _cond = _env_config_for(puzzle, args_ns)
        return config

    server = EpisodeServer(puzzles, make_config, records_out=args.out)
    if args.transport == "stdio":
        played = serve_stdio(server)
        print(f"served {played} episodes", file=sys.stderr)
        return 0
    if args.transport.startswith("socket:"):
        port = int(args.transport.split(":", 1)[1])

        def ready(bound_port):
            print(f"listening on 127.0.0.1:{bound_port}", file=sys.stderr)

        served = serve_socket(server, port, episodes=args.episodes, ready=ready)
        print(f"served {served} episodes", file=sys.stderr)
        return 0
    raise CliError(f"unknown transport {args.transport!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zebrasim",
        description="Partially observed zebra-puzzle environments with a query oracle.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="generate a dataset from a JSON config")
    p_gen.add_argument("--config", required=True, help="declarative dataset config (JSON)")
    p_gen.add_argument("--out", required=True, help="output directory")
    p_gen.set_defaults(func=cmd_generate)

    p_run = sub.add_parser("run", help="play scripted or external episodes over a dataset")
    p_run.add_argument("--dataset", required=True)
    p_run.add_argument("--env", default="normal", choices=("normal", "only_fact", "only_relation"))
    p_run.add_argument("--budget", default="none", help="none | N | tight | normal:MODEL | relaxed:MODEL")
    p_run.add_argument("--pricing", default="none", help="none | CONDITION[@SCALE]")
    p_run.add_argument("--agent", required=True, help="cheating_oracle | greedy_ig | random | external")
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--jobs", type=int, default=1)
    p_run.add_argument("--max-turns", type=int, default=50)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--transport", default="stdio", help="external mode: socket:PORT")
    p_run.add_argument("--timeout", type=float, default=30.0, help="external mode accept timeout")
    p_run.set_defaults(func=cmd_run)

    p_score = sub.add_parser("score", help="aggregate metrics over an episode record file")
    p_score.add_argument("--records", required=True)
    p_score.add_argument("--group-by", default="size,n_missing")
    p_score.add_argument("--log-base", default="e", choices=("e", "2"))
    p_score.add_argument("--out", default=None)
    p_score.set_defaults(func=cmd_score)

    p_serve = sub.add_parser("serve", help="serve episodes to an external client")
    p_serve.add_argument("--dataset", required=True)
    p_serve.add_argument("--transport", default="stdio", help="stdio | socket:PORT")
    p_serve.add_argument("--env", default="normal", choices=("normal", "only_fact", "only_relation"))
    p_serve.add_argument("--budget", default="none")
    p_serve.add_argument("--pricing", default="none")
    p_serve.add_argument("--max-turns", type=int, default=50)
    p_serve.add_argument("--episodes", type=int, default=None, help="socket mode: connections to accept")
    p_serve.add_argument("--out", default=None, help="append EpisodeRecords to this JSONL file")
    p_serve.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ConfigMismatch, UnknownCondition, FileNotFoundError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ZebraSimError as exc:
        print(f"runtime fault: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
