"""Agent-environment message protocol and the episode loop.

Agent messages carry reasoning in <think> tags, at most one <query>,
or one <solution>.  Tags are matched case-sensitively and must be well
nested; anything outside tags, nested tags, extra payloads, or broken
JSON is a protocol violation.  Violations are answered with an error
response and consume a turn but never budget.  Environment responses are
single-line structured records rendered to a deterministic text form for
the model side of the conversation.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources

from .core import PROTOCOL_VERSION, Puzzle, house_to_wire
from .environment import EnvConfig, SessionState, create_session

_TAG_RE = re.compile(r"</?(think|query|solution)>")

VIOLATION_CODES = (
    "QueryAndSolution",
    "MultipleQueries",
    "MultipleSolutions",
    "UntaggedContent",
    "PayloadParseError",
)


@dataclass
class AgentMessage:
    raw: str
    think_spans: list = field(default_factory=list)
    query_payloads: list = field(default_factory=list)  # raw strings
    solution_payloads: list = field(default_factory=list)
    parsed_query: dict | list | None = None
    parsed_solution: dict | list | None = None
    violations: list = field(default_factory=list)

    @property
    def kind(self) -> str:
        if self.violations:
            return "violation"
        if self.solution_payloads:
            return "solution"
        if self.query_payloads:
            return "query"
        return "think"


def parse_agent_message(raw: str) -> AgentMessage:
    """Split a raw agent message into tagged spans and protocol verdicts."""
    msg = AgentMessage(raw=raw)

    def violate(code: str) -> None:
        if code not in msg.violations:
            msg.violations.append(code)

    spans = []  # (tag, content)
    open_tag = None
    open_end = 0
    last_end = 0
    balanced = True
    for match in _TAG_RE.finditer(raw):
        token = match.group(0)
        tag = match.group(1)
        closing = token.startswith("</")
        if open_tag is None:
            if raw[last_end : match.start()].strip():
                violate("UntaggedContent")
            if closing:
                balanced = False
            else:
                open_tag = tag
                open_end = match.end()
        else:
            if closing and tag == open_tag:
                spans.append((open_tag, raw[open_end : match.start()]))
                open_tag = None
            else:
                # A tag opening inside another tag's span.
                balanced = False
        last_end = match.end()
    if open_tag is not None:
        balanced = False
    elif raw[last_end:].strip():
        violate("UntaggedContent")
    if not balanced:
        violate("PayloadParseError")

    for tag, content in spans:
        if tag == "think":
            msg.think_spans.append(content)
        elif tag == "query":
            msg.query_payloads.append(content)
        else:
            msg.solution_payloads.append(content)

    if msg.query_payloads and msg.solution_payloads:
        violate("QueryAndSolution")
    if len(msg.query_payloads) > 1:
        violate("MultipleQueries")
    if len(msg.solution_payloads) > 1:
        violate("MultipleSolutions")

    if len(msg.query_payloads) == 1:
        try:
            msg.parsed_query = json.loads(msg.query_payloads[0])
        except json.JSONDecodeError:
            violate("PayloadParseError")
    if len(msg.solution_payloads) == 1:
        try:
            msg.parsed_solution = json.loads(msg.solution_payloads[0])
        except json.JSONDecodeError:
            violate("PayloadParseError")
    return msg


def make_message(think: str | None = None, query: dict | None = None, solution: dict | None = None) -> str:
    """Canonical agent message text; the inverse of parse_agent_message."""
    parts = []
    if think is not None:
        parts.append(f"<think>{think}</think>")
    if query is not None:
        parts.append(f"<query>{json.dumps(query, separators=(', ', ': '))}</query>")
    if solution is not None:
        parts.append(f"<solution>{json.dumps(solution, separators=(', ', ': '))}</solution>")
    return "".join(parts)


# --- prompt rendering ---------------------------------------------------

def _template(name: str) -> str:
    return resources.files("zebrasim").joinpath("prompts", name).read_text(encoding="utf-8")


def _fill(template: str, mapping: dict) -> str:
    # Literal token replacement; str.format would trip on the JSON braces.
    out = template
    for key, value in mapping.items():
        out = out.replace("{" + key + "}", value)
    return out


def render_system_prompt(puzzle: Puzzle, config: EnvConfig) -> str:
    base_name = {
        "normal": "system_normal.txt",
        "only_fact": "system_only_fact.txt",
        "only_relation": "system_only_relation.txt",
    }[config.env_type]
    houses = [house_to_wire(h) for h in range(1, puzzle.n_houses + 1)]
    mapping = {
        "houses": json.dumps(houses),
        "attrs": json.dumps(list(puzzle.attributes)),
        "domain": json.dumps({a: list(puzzle.domains[a]) for a in puzzle.attributes}),
        "header": json.dumps(["House"] + list(puzzle.attributes)),
    }
    prompt = _fill(_template(base_name), mapping)
    if config.budget_limit is not None:
        prompt += "\n" + _fill(_template("block_budget.txt"), {"budget": str(config.budget_limit)})
    if config.pricing is not None:
        prompt += "\n" + _fill(
            _template("block_pricing.txt"),
            {
                "fact_price": str(config.pricing.fact_price),
                "relation_price": str(config.pricing.relation_price),
            },
        )
    return prompt


def render_task_prompt(puzzle: Puzzle) -> str:
    domain_lines = "\n".join(
        f"- {attr}: {', '.join(puzzle.domains[attr])}" for attr in puzzle.attributes
    )
    clue_lines = "\n".join(
        f"{i}. {clue.text}" for i, clue in enumerate(puzzle.visible_clues(), start=1)
    )
    return _fill(
        _template("task.txt"),
        {
            "n_houses": str(puzzle.n_houses),
            "domain_lines": domain_lines,
            "clue_lines": clue_lines,
        },
    )


def build_init(puzzle: Puzzle, config: EnvConfig, model: str | None = None) -> dict:
    """The init payload a client needs to start playing an episode."""
    return {
        "protocol_version": PROTOCOL_VERSION,
        "type": "init",
        "puzzle_id": puzzle.id,
        "system_prompt": render_system_prompt(puzzle, config),
        "task_prompt": render_task_prompt(puzzle),
        "houses": [house_to_wire(h) for h in range(1, puzzle.n_houses + 1)],
        "attrs": list(puzzle.attributes),
        "domain": {a: list(puzzle.domains[a]) for a in puzzle.attributes},
        "header": ["House"] + list(puzzle.attributes),
        "visible_clues": [clue.text for clue in puzzle.visible_clues()],
        "env_type": config.env_type,
        "budget": config.budget_limit,
        "pricing": config.pricing.to_record() if config.pricing else None,
        "max_turns": config.max_turns,
        "model": model,
    }


# --- episode loop -------------------------------------------------------

def render_response_text(response: dict) -> str:
    """The text the model sees: a compact JSON line plus any trailers."""
    kind = response["kind"]
    if kind == "answer":
        body: dict = {"answer": response.get("answer")} if "answer" in response else {"answer": None}
        if "detail" in response:
            body["detail"] = response["detail"]
    elif kind == "error":
        body = {"error": response.get("error_code"), "detail": response.get("detail")}
    else:
        body = {"verdict": "correct" if response.get("correct") else "incorrect"}
        if response.get("error_code"):
            body = {"verdict": "malformed", "detail": response.get("detail")}
    lines = [json.dumps(body)]
    if "budget" in response:
        lines.append(response["budget"])
    if "usage" in response:
        lines.append(response["usage"])
    return "\n".join(lines)


def episode_step(session: SessionState, text: str, reported_tokens: int | None = None) -> tuple[dict, AgentMessage]:
    """Feed one agent message through the environment; returns the response."""
    session.note_agent_message(text, reported_tokens)
    msg = parse_agent_message(text)
    if msg.violations:
        response = session.protocol_error(
            code=msg.violations[0], detail="; ".join(msg.violations)
        )
    elif msg.solution_payloads:
        response = session.grade_solution(msg.parsed_solution)
    elif msg.query_payloads:
        response = session.answer_query(msg.parsed_query)
    else:
        response = session.acknowledge()
    session.transcript.append(
        {
            "turn": session.turn,
            "agent_text": text,
            "action": msg.kind,
            "violations": list(msg.violations),
            "response": response,
        }
    )
    return response, msg


def finalize_record(session: SessionState, agent_label: str, model: str | None = None,
                    budget_condition: str | None = None) -> dict:
    """Assemble the full EpisodeRecord for storage and scoring."""
    puzzle = session.puzzle
    config = session.config
    tool_calls = sum(1 for e in session.transcript if e["action"] == "query")
    return {
        "protocol_version": PROTOCOL_VERSION,
        "puzzle_id": puzzle.id,
        "size": puzzle.size,
        "n_houses": puzzle.n_houses,
        "n_attributes": len(puzzle.attributes),
        "k_star": puzzle.k_star,
        "initial_count": puzzle.initial_count,
        "env_type": config.env_type,
        "budget_limit": config.budget_limit,
        "budget_condition": budget_condition,
        "pricing": config.pricing.to_record() if config.pricing else None,
        "max_turns": config.max_turns,
        "agent": agent_label,
        "model": model,
        "status": session.status,
        "accuracy": session.accuracy,
        "fail_reason": session.fail_reason,
        "fault": session.fault,
        "steps": len(session.transcript),
        "tool_calls": tool_calls,
        "valid_calls": session.valid_calls,
        "queries_issued": session.queries_issued,
        "budget_remaining": session.budget_remaining,
        "counts_trace": list(session.counts_trace),
        "query_log": list(session.query_log),
        "ledger": session.ledger(),
        "turns": list(session.transcript),
    }


def run_episode(agent, puzzle: Puzzle, config: EnvConfig, agent_label: str = "scripted",
                model: str | None = None, budget_condition: str | None = None) -> dict:
    """Drive an in-process agent callable to completion.

    The agent maps the conversation so far (a list of {role, content}
    dicts) to its next message text.  Any exception it raises is recorded
    as an agent fault and fails the episode.
    """
    session = create_session(puzzle, config)
    conversation = [
        {"role": "system", "content": render_system_prompt(puzzle, config)},
        {"role": "user", "content": render_task_prompt(puzzle)},
    ]
    while session.status == "running":
        if session.turn >= config.max_turns:
            session.mark_exhausted()
            break
        try:
            text = agent(conversation)
        except Exception as exc:  # noqa: BLE001 - faults are data here
            session.mark_fault(f"{type(exc).__name__}: {exc}")
            break
        response, _msg = episode_step(session, text)
        conversation.append({"role": "assistant", "content": text})
        conversation.append({"role": "user", "content": render_response_text(response)})
    return finalize_record(session, agent_label, model=model, budget_condition=budget_condition)
