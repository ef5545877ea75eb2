"""Interactive oracle sessions over a masked puzzle.

The environment answers boolean queries against the hidden ground truth,
tracks the feasible-grid count as answers accumulate, meters a soft
budget and per-kind token prices, and grades submitted solutions.
Invalidity is a verdict, not an exception: malformed or out-of-scope
queries produce an error response, consume budget, and leave the
constraint state untouched.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .core import (
    Entity,
    Kind,
    PROTOCOL_VERSION,
    Puzzle,
    Query,
    RELATION_NAMES,
    InvalidToken,
    ZebraSimError,
    canonicalize_token,
    house_from_wire,
    validate_puzzle,
)
from . import solver

ENV_TYPES = ("normal", "only_fact", "only_relation")

INVALID_REASONS = (
    "MalformedRecord",
    "KindForbidden",
    "UnknownHouse",
    "UnknownAttribute",
    "UnknownValue",
    "UnknownRelation",
)


class ConfigMismatch(ZebraSimError):
    pass


class SessionNotRunning(ZebraSimError):
    pass


class UnknownCondition(ZebraSimError):
    pass


# --- pricing and budgets ------------------------------------------------

# (fact_price, relation_price) per published condition, two price scales.
PRICING_SCALES = {
    "gemini-2.5-flash": {
        "baseline": (500, 500),
        "fact cheap": (250, 500),
        "fact expensive": (1000, 500),
        "relation cheap": (500, 250),
        "relation expensive": (500, 1000),
        "both cheap": (250, 250),
        "both expensive": (1000, 1000),
        "fact very cheap": (100, 2000),
        "fact very expensive": (2000, 100),
        "tool free": (0, 0),
    },
    "qwen3-235b": {
        "baseline": (250, 250),
        "fact cheap": (125, 250),
        "fact expensive": (500, 250),
        "relation cheap": (250, 125),
        "relation expensive": (250, 500),
        "both cheap": (125, 125),
        "both expensive": (500, 500),
        "fact very cheap": (50, 1000),
        "fact very expensive": (1000, 50),
        "tool free": (0, 0),
    },
}

_SCALE_ALIASES = {"gemini": "gemini-2.5-flash", "qwen": "qwen3-235b"}

# Published per-model (tight, normal, relaxed) soft-budget rows for
# medium puzzles, keyed by k_star.  Tight always equals k_star.
BUDGET_TABLE = {
    "medium": {
        "gemini-2.5-flash": {1: (1, 2, 3), 2: (2, 6, 8), 3: (3, 11, 14), 4: (4, 15, 19)},
        "gemini-2.5-pro": {1: (1, 2, 3), 2: (2, 4, 6), 3: (3, 6, 9), 4: (4, 8, 12)},
        "gpt-5-mini": {1: (1, 2, 3), 2: (2, 4, 6), 3: (3, 6, 9), 4: (4, 9, 14)},
        "gpt-5": {1: (1, 2, 4), 2: (2, 6, 10), 3: (3, 11, 14), 4: (4, 15, 19)},
        "qwen3-235b": {1: (1, 2, 4), 2: (2, 5, 8), 3: (3, 7, 11), 4: (4, 9, 14)},
        "llama-3.3-70b": {1: (1, 5, 9), 2: (2, 6, 10), 3: (3, 7, 11), 4: (4, 8, 12)},
        "gpt-oss-120b": {1: (1, 3, 5), 2: (2, 5, 8), 3: (3, 6, 9), 4: (4, 6, 11)},
    }
}

_BUDGET_COLUMN = {"tight": 0, "normal": 1, "relaxed": 2}


def _normalize_label(label: str) -> str:
    return " ".join(label.lower().replace("-", " ").replace("_", " ").split())


def price_table(condition: str, scale: str = "gemini-2.5-flash") -> tuple[int, int]:
    """(fact_price, relation_price) for a named pricing condition."""
    scale_key = _normalize_label(scale).replace(" ", "-")
    scale_key = _SCALE_ALIASES.get(scale_key, scale_key)
    if scale_key not in PRICING_SCALES:
        raise UnknownCondition(f"unknown price scale {scale!r}; have {sorted(PRICING_SCALES)}")
    table = PRICING_SCALES[scale_key]
    key = _normalize_label(condition)
    if key not in table:
        raise UnknownCondition(f"unknown pricing condition {condition!r}; have {sorted(table)}")
    return table[key]


def resolve_budget(condition: str, k_star: int, size: str, model: str | None = None) -> int:
    """Turn a budget condition into a concrete soft limit.

    'tight' is k_star for any instance.  'normal'/'relaxed' come from the
    shipped per-model table; asking outside its cells is a config error
    and the caller must pass an explicit integer limit instead.
    """
    key = _normalize_label(condition)
    if key not in _BUDGET_COLUMN:
        raise UnknownCondition(f"unknown budget condition {condition!r}; have tight/normal/relaxed")
    if key == "tight":
        return k_star
    if model is None:
        raise ConfigMismatch(f"budget condition {condition!r} needs a model label")
    model_key = _normalize_label(model).replace(" ", "-")
    table = BUDGET_TABLE.get(size, {}).get(model_key)
    if table is None or k_star not in table:
        raise ConfigMismatch(
            f"no shipped {condition!r} budget for size={size!r}, model={model!r}, k_star={k_star};"
            " pass an explicit limit"
        )
    return table[k_star][_BUDGET_COLUMN[key]]


@dataclass(frozen=True)
class Pricing:
    fact_price: int
    relation_price: int
    condition: str | None = None
    scale: str | None = None

    def price(self, qtype: str | None) -> int:
        if qtype == "fact":
            return self.fact_price
        if qtype == "relation":
            return self.relation_price
        # Kind-indeterminate malformed records are charged the cheaper kind.
        return min(self.fact_price, self.relation_price)

    def to_record(self) -> dict:
        return {
            "fact_price": self.fact_price,
            "relation_price": self.relation_price,
            "condition": self.condition,
            "scale": self.scale,
        }


@dataclass(frozen=True)
class EnvConfig:
    env_type: str = "normal"
    budget_limit: int | None = None
    pricing: Pricing | None = None
    max_turns: int = 50
    count_cap: int = solver.DEFAULT_CAP
    reasoning_estimator: str = "whitespace"

    def __post_init__(self) -> None:
        if self.env_type not in ENV_TYPES:
            raise ConfigMismatch(f"env_type must be one of {ENV_TYPES}, got {self.env_type!r}")
        if self.budget_limit is not None and self.budget_limit < 0:
            raise ConfigMismatch(f"budget_limit must be >= 0, got {self.budget_limit}")
        if self.max_turns < 1:
            raise ConfigMismatch(f"max_turns must be >= 1, got {self.max_turns}")


@dataclass(frozen=True)
class QueryVerdict:
    valid: bool
    reason: str | None = None
    detail: str | None = None


def estimate_reasoning_tokens(text: str) -> int:
    """Default estimator: whitespace-delimited units of the full message."""
    return len(text.split())


class SessionState:
    """One episode's oracle state: constraints, counts, budget, ledger."""

    def __init__(self, puzzle: Puzzle, config: EnvConfig):
        self.puzzle = puzzle
        self.config = config
        self.turn = 0
        self.status = "running"
        self.fail_reason: str | None = None
        self.fault: str | None = None
        self.accuracy = 0
        self.constraints = solver.ConstraintSet(
            c.constraint for c in puzzle.visible_clues()
        )
        # Count cache is primed from the certified dataset value; the
        # feasible list is materialized lazily on the first valid query.
        self.count: int | None = puzzle.initial_count
        self.count_overflowed = False
        self._solutions: list | None = None
        self.counts_trace: list = [puzzle.initial_count]
        self.queries_issued = 0
        self.valid_calls = 0
        self.reasoning_tokens = 0
        self.tool_tokens = 0
        self.any_reported_tokens = False
        self.query_log: list[dict] = []
        self.transcript: list[dict] = []
        self._next_qid = 1

    # -- ledger ----------------------------------------------------------

    @property
    def total_tokens(self) -> int:
        return self.reasoning_tokens + self.tool_tokens

    @property
    def budget_remaining(self) -> int | None:
        if self.config.budget_limit is None:
            return None
        return self.config.budget_limit - self.queries_issued

    def note_agent_message(self, text: str, reported_tokens: int | None = None) -> None:
        if self.status != "running":
            raise SessionNotRunning(f"session is {self.status}")
        self.turn += 1
        if reported_tokens is not None:
            self.reasoning_tokens += int(reported_tokens)
            self.any_reported_tokens = True
        else:
            self.reasoning_tokens += estimate_reasoning_tokens(text)

    def ledger(self) -> dict:
        estimator = "model_reported" if self.any_reported_tokens else self.config.reasoning_estimator
        return {
            "reasoning_tokens": self.reasoning_tokens,
            "tool_tokens": self.tool_tokens,
            "total_tokens": self.total_tokens,
            "estimator": estimator,
        }

    # -- responses ---------------------------------------------------------

    def trailers(self) -> dict:
        out = {}
        if self.config.budget_limit is not None:
            out["budget"] = f"[Budget: {self.budget_remaining}/{self.config.budget_limit} remaining]"
        if self.config.pricing is not None:
            out["usage"] = (
                f"[Token usage: {self.reasoning_tokens} reasoning + {self.tool_tokens} tools"
                f" = {self.total_tokens} total]"
            )
        return out

    def build_response(self, kind: str, **body) -> dict:
        response = {"protocol_version": PROTOCOL_VERSION, "kind": kind}
        response.update(body)
        response.update(self.trailers())
        response["turn"] = self.turn
        return response

    # -- feasible set ----------------------------------------------------

    def _ensure_solutions(self) -> None:
        if self._solutions is not None or self.count_overflowed:
            return
        grids, overflowed = solver.enumerate_solutions(
            self.constraints.constraints, self.puzzle.dims, cap=self.config.count_cap
        )
        if overflowed:
            self.count_overflowed = True
            self.count = None
        else:
            self._solutions = grids
            self.count = len(grids)

    def _apply_constraint(self, constraint) -> None:
        added = self.constraints.add(constraint)
        if self.count_overflowed:
            # Try again from scratch; added constraints may shrink the
            # space back under the cap.
            result = solver.count_solutions(
                self.constraints.constraints, self.puzzle.dims, cap=self.config.count_cap
            )
            if result.overflowed:
                self.count = None
            else:
                self.count_overflowed = False
                self.count = result.count
                self._solutions = None
            return
        if self._solutions is None:
            self._ensure_solutions()
            if self.count_overflowed:
                return
        if added:
            self._solutions = [g for g in self._solutions if solver.holds(constraint, g)]
            self.count = len(self._solutions)

    # -- query handling ----------------------------------------------------

    def validate_query(self, record) -> tuple[QueryVerdict, Query | None]:
        """Schema, kind admissibility, membership, relation name -- in order."""
        puzzle = self.puzzle
        if not isinstance(record, dict):
            return QueryVerdict(False, "MalformedRecord", "query must be a JSON object"), None
        qtype = record.get("type")
        if qtype not in ("fact", "relation"):
            return QueryVerdict(False, "MalformedRecord", f"bad type: {qtype!r}"), None

        expected_keys = (
            {"type", "rel", "house", "attr", "value"}
            if qtype == "fact"
            else {"type", "rel", "lhs", "rhs"}
        )
        if set(record) != expected_keys:
            missing = expected_keys - set(record)
            extra = set(record) - expected_keys
            return (
                QueryVerdict(
                    False,
                    "MalformedRecord",
                    f"missing fields {sorted(missing)}, unexpected fields {sorted(extra)}",
                ),
                None,
            )
        if qtype == "fact":
            if not all(isinstance(record[k], str) for k in ("rel", "house", "attr", "value")):
                return QueryVerdict(False, "MalformedRecord", "fact fields must be strings"), None
        else:
            for side in ("lhs", "rhs"):
                ent = record[side]
                if (
                    not isinstance(ent, dict)
                    or set(ent) != {"attr", "value"}
                    or not all(isinstance(ent[k], str) for k in ("attr", "value"))
                ):
                    return QueryVerdict(False, "MalformedRecord", f"bad {side} entity object"), None
            if not isinstance(record["rel"], str):
                return QueryVerdict(False, "MalformedRecord", "rel must be a string"), None

        if self.config.env_type == "only_fact" and qtype == "relation":
            return QueryVerdict(False, "KindForbidden", "relation queries are disabled here"), None
        if self.config.env_type == "only_relation" and qtype == "fact":
            return QueryVerdict(False, "KindForbidden", "fact queries are disabled here"), None

        def canon(raw: str) -> str | None:
            try:
                return puzzle.canonical_value(raw)
            except InvalidToken:
                return None

        if qtype == "fact":
            house_tok = canon(record["house"])
            house = house_from_wire(house_tok, puzzle.n_houses) if house_tok else None
            if house is None:
                return QueryVerdict(False, "UnknownHouse", f"bad house: {record['house']!r}"), None
            attr = canon(record["attr"])
            if attr is None or attr not in puzzle.attributes:
                return QueryVerdict(False, "UnknownAttribute", f"bad attribute: {record['attr']!r}"), None
            value = canon(record["value"])
            if value is None or value not in puzzle.domains[attr]:
                return QueryVerdict(False, "UnknownValue", f"bad value: {record['value']!r}"), None
            rel = canon(record["rel"])
            if rel != Kind.FOUND_AT.value:
                return QueryVerdict(False, "UnknownRelation", f"fact queries use rel 'found_at', got {record['rel']!r}"), None
            return QueryVerdict(True), Query(qtype="fact", rel=rel, lhs=Entity(attr, value), house=house)

        sides = []
        for side in ("lhs", "rhs"):
            attr = canon(record[side]["attr"])
            if attr is None or attr not in puzzle.attributes:
                return QueryVerdict(False, "UnknownAttribute", f"bad attribute in {side}: {record[side]['attr']!r}"), None
            value = canon(record[side]["value"])
            if value is None or value not in puzzle.domains[attr]:
                return QueryVerdict(False, "UnknownValue", f"bad value in {side}: {record[side]['value']!r}"), None
            sides.append(Entity(attr, value))
        rel = canon(record["rel"])
        if rel not in RELATION_NAMES:
            return QueryVerdict(False, "UnknownRelation", f"unknown relation: {record['rel']!r}"), None
        return QueryVerdict(True), Query(qtype="relation", rel=rel, lhs=sides[0], rhs=sides[1])

    def answer_query(self, record) -> dict:
        """Validate, charge, answer, and fold the answer into the state."""
        if self.status != "running":
            raise SessionNotRunning(f"session is {self.status}")
        verdict, query = self.validate_query(record)

        self.queries_issued += 1
        declared = record.get("type") if isinstance(record, dict) else None
        if declared not in ("fact", "relation"):
            declared = None
        if self.config.pricing is not None:
            self.tool_tokens += self.config.pricing.price(declared)

        if not verdict.valid:
            self.query_log.append(
                {
                    "query": record if isinstance(record, dict) else repr(record),
                    "valid": False,
                    "reason": verdict.reason,
                    "answer": None,
                    "count_before": self.count,
                    "count_after": self.count,
                }
            )
            return self.build_response("error", error_code=verdict.reason, detail=verdict.detail)

        asserted = query.to_constraint(cid=f"q{self._next_qid}")
        self._next_qid += 1
        answer = solver.holds(asserted, self.puzzle.solution)
        implied = asserted if answer else asserted.negated()
        count_before = self.count
        self._apply_constraint(implied)
        self.valid_calls += 1
        self.counts_trace.append(self.count)
        self.query_log.append(
            {
                "query": query.to_record(),
                "valid": True,
                "reason": None,
                "answer": answer,
                "count_before": count_before,
                "count_after": self.count,
            }
        )
        return self.build_response("answer", answer=answer)

    # -- grading -----------------------------------------------------------

    def grade_solution(self, payload) -> dict:
        """Grade a proposed grid; the session ends either way."""
        if self.status != "running":
            raise SessionNotRunning(f"session is {self.status}")
        problem = self._solution_problem(payload)
        if problem is not None:
            self.status = "failed"
            self.fail_reason = "malformed_solution"
            self.accuracy = 0
            return self.build_response(
                "final", correct=False, error_code="MalformedSolution", detail=problem
            )
        correct = self._solution_matches(payload)
        self.status = "solved" if correct else "failed"
        self.fail_reason = None if correct else "incorrect"
        self.accuracy = 1 if correct else 0
        return self.build_response("final", correct=correct)

    def _solution_problem(self, payload) -> str | None:
        puzzle = self.puzzle
        if not isinstance(payload, dict) or set(payload) != {"header", "rows"}:
            return "solution must be an object with 'header' and 'rows'"
        header = payload["header"]
        rows = payload["rows"]
        if not isinstance(header, list) or not all(isinstance(h, str) for h in header):
            return "header must be a list of strings"
        expected = ["house"] + list(puzzle.attributes)
        try:
            got = [canonicalize_token(h) for h in header]
        except InvalidToken:
            return "header contains an empty cell"
        if got != expected:
            return f"header must be {expected} in that order"
        if not isinstance(rows, list) or len(rows) != puzzle.n_houses:
            return f"rows must be a list of exactly {puzzle.n_houses} rows"
        seen_houses = set()
        for row in rows:
            if not isinstance(row, list) or len(row) != len(puzzle.attributes) + 1:
                return "each row must list the house then one value per attribute"
            if not all(isinstance(cell, str) for cell in row):
                return "row cells must be strings"
            try:
                cells = [puzzle.canonical_value(cell) for cell in row]
            except InvalidToken:
                return "row contains an empty cell"
            if cells[0] not in {str(h) for h in range(1, puzzle.n_houses + 1)}:
                return f"row label {row[0]!r} is not a house number"
            if cells[0] in seen_houses:
                return f"house {cells[0]} appears twice"
            seen_houses.add(cells[0])
            for attr, value in zip(puzzle.attributes, cells[1:]):
                if value not in puzzle.domains[attr]:
                    return f"value {value!r} is outside the domain of {attr!r}"
        return None

    def _solution_matches(self, payload) -> bool:
        puzzle = self.puzzle
        for row in payload["rows"]:
            cells = [puzzle.canonical_value(cell) for cell in row]
            house = int(cells[0])
            for attr, value in zip(puzzle.attributes, cells[1:]):
                if puzzle.solution.value_at(house, attr) != value:
                    return False
        return True

    # -- misc --------------------------------------------------------------

    def acknowledge(self) -> dict:
        """Response to a legal think-only turn."""
        return self.build_response(
            "answer", detail="no query or solution in that message; ask or answer when ready"
        )

    def protocol_error(self, code: str, detail: str) -> dict:
        """Protocol violations consume a turn but never budget."""
        return self.build_response("error", error_code=code, detail=detail)

    def mark_exhausted(self) -> None:
        self.status = "exhausted"
        self.fail_reason = "max_turns"
        self.accuracy = 0

    def mark_fault(self, detail: str, reason: str = "agent_fault") -> None:
        self.status = "failed"
        self.fail_reason = reason
        self.fault = detail
        self.accuracy = 0


def create_session(puzzle: Puzzle, config: EnvConfig) -> SessionState:
    """Validate inputs and open a running session."""
    problems = validate_puzzle(puzzle)
    if problems:
        raise ConfigMismatch(f"puzzle {puzzle.id} fails validation: {[str(p) for p in problems]}")
    return SessionState(puzzle, config)
