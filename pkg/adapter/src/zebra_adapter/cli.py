"""Command-line entry points: play live episodes or replay stored ones."""

from __future__ import annotations

import argparse
import json
import sys

from .bindings import load_bindings
from .errors import AdapterError, ConfigError, TransportError
from .play import RateLimiter, replay_records, run_episodes
from .transport import connect, spawn_socket_server


def _parse_connect(value: str) -> tuple[str, int]:
    host, sep, port = value.rpartition(":")
    if not sep or not port.isdigit():
        raise ConfigError(f"--connect expects HOST:PORT, got {value!r}")
    return host or "127.0.0.1", int(port)


def _endpoint_factory(args):
    """Returns (make_endpoint, cleanup) for --connect or --spawn."""
    if args.connect and args.spawn:
        raise ConfigError("use --connect or --spawn, not both")
    if args.connect:
        host, port = _parse_connect(args.connect)
        return (lambda: connect(host, port)), (lambda: None)
    if args.spawn:
        server = spawn_socket_server(args.spawn)
        return server.connect, server.terminate
    raise ConfigError("one of --connect or --spawn is required")


def _load_records(path: str) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: line {lineno}: {exc}") from exc
            if not isinstance(record, dict) or "puzzle_id" not in record:
                raise ConfigError(f"{path}: line {lineno}: not an episode record")
            records.append(record)
    if not records:
        raise ConfigError(f"{path}: no records")
    return records


def _write_outcomes(path: str, outcomes) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for outcome in outcomes:
            if outcome.record is not None:
                fh.write(json.dumps(outcome.record, separators=(",", ":")) + "\n")


def _report(label: str, outcomes) -> int:
    solved = sum(1 for o in outcomes if o.record and o.record.get("status") == "solved")
    faults = [o for o in outcomes if o.record is None]
    print(f"{label} {len(outcomes)} episodes, {solved} solved, {len(faults)} faults")
    for outcome in faults:
        print(f"fault: {outcome.fault}")
    return 3 if faults else 0


def cmd_replay(args) -> int:
    records = _load_records(args.records)
    make_endpoint, cleanup = _endpoint_factory(args)
    try:
        outcomes = replay_records(records, make_endpoint, jobs=args.jobs)
    finally:
        cleanup()
    if args.out:
        _write_outcomes(args.out, outcomes)
    return _report("replayed", outcomes)


def cmd_play(args) -> int:
    bindings = load_bindings(args.bindings)
    if args.condition not in bindings:
        raise ConfigError(
            f"condition {args.condition!r} not in {args.bindings}; "
            f"have: {sorted(bindings)}"
        )
    binding = bindings[args.condition]
    limiter = RateLimiter(args.rate) if args.rate > 0 else None
    make_endpoint, cleanup = _endpoint_factory(args)
    try:
        outcomes = run_episodes(
            binding,
            make_endpoint,
            episodes=args.episodes,
            jobs=args.jobs,
            retries=args.retries,
            limiter=limiter,
        )
    finally:
        cleanup()
    if args.out:
        _write_outcomes(args.out, outcomes)
    if args.manifest:
        manifest = {
            "condition": args.condition,
            "binding": binding.to_record(),
            "decoding_params": dict(binding.params),
            "episodes": args.episodes,
            "jobs": args.jobs,
            "retries": args.retries,
            "rate_limit": args.rate,
        }
        with open(args.manifest, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return _report("played", outcomes)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zebra-adapter",
        description="drive zebra-puzzle episodes with chat-completion backends",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_play = sub.add_parser("play", help="play live episodes with a configured model")
    p_play.add_argument("--bindings", required=True, help="JSON map of condition -> binding")
    p_play.add_argument("--condition", required=True)
    p_play.add_argument("--connect", default=None, help="HOST:PORT of a running server")
    p_play.add_argument("--spawn", default=None, help="server command to launch (socket mode)")
    p_play.add_argument("--episodes", type=int, required=True)
    p_play.add_argument("--jobs", type=int, default=1)
    p_play.add_argument("--retries", type=int, default=3)
    p_play.add_argument("--rate", type=float, default=0.0,
                        help="minimum seconds between backend calls")
    p_play.add_argument("--out", default=None, help="write received records to this JSONL file")
    p_play.add_argument("--manifest", default=None, help="write run settings to this JSON file")
    p_play.set_defaults(func=cmd_play)

    p_replay = sub.add_parser("replay", help="replay stored records through a server")
    p_replay.add_argument("--records", required=True, help="stored EpisodeRecord JSONL")
    p_replay.add_argument("--connect", default=None, help="HOST:PORT of a running server")
    p_replay.add_argument("--spawn", default=None, help="server command to launch (socket mode)")
    p_replay.add_argument("--jobs", type=int, default=1)
    p_replay.add_argument("--out", default=None, help="write received records to this JSONL file")
    p_replay.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (TransportError, AdapterError) as exc:
        print(f"runtime fault: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
