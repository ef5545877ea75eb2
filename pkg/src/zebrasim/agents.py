"""Scripted reference agents.

All four speak the tag protocol and are deterministic given their seed.
The cheating oracle reads the hidden clue list (a diagnostic upper
bound); the greedy and random agents see only what a fair player sees:
dims, domains, and the visible clues.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

from .core import (
    Entity,
    Kind,
    Puzzle,
    PuzzleDims,
    Query,
    RELATION_KINDS,
    SYMMETRIC_KINDS,
    query_for_constraint,
)
from .protocol import make_message
from . import solver

CANDIDATE_CAP = 5000


@dataclass(frozen=True)
class PublicView:
    """What a fair agent may see: shape, domains, visible clues."""

    dims: PuzzleDims
    visible_constraints: tuple

    @classmethod
    def of(cls, puzzle: Puzzle) -> "PublicView":
        return cls(
            dims=puzzle.dims,
            visible_constraints=tuple(c.constraint for c in puzzle.visible_clues()),
        )


def _last_answer(conversation) -> bool:
    """Read the boolean answer out of the latest environment message.

    The episode loop always appends the environment's reply last, so the
    tail of the conversation is the response to our pending query.
    """
    body = json.loads(conversation[-1]["content"].splitlines()[0])
    if body.get("answer") is None:
        raise RuntimeError(f"expected a boolean answer, got: {conversation[-1]['content']!r}")
    return bool(body["answer"])


class CheatingOracleAgent:
    """Privileged diagnostic agent: queries exactly the missing clues.

    Turn t <= k_star asks the query whose asserted form is the t-th
    missing clue; the next turn submits the unique solution derived from
    the accumulated constraint set.
    """

    def __init__(self, puzzle: Puzzle):
        self.puzzle = puzzle
        self.missing = [c.constraint for c in puzzle.missing_clues()]
        self.step = 0

    def __call__(self, conversation) -> str:
        if self.step < len(self.missing):
            clue = self.missing[self.step]
            self.step += 1
            query = query_for_constraint(clue)
            return make_message(
                think=f"asking for hidden clue {self.step} of {len(self.missing)}",
                query=query.to_record(),
            )
        constraints = [c.constraint for c in self.puzzle.visible_clues()] + self.missing
        unique, witness = solver.is_unique(constraints, self.puzzle.dims)
        if not unique:
            raise RuntimeError("full clue set did not pin a unique grid")
        return make_message(think="all hidden clues recovered", solution=witness.to_record())


class _MirrorAgent:
    """Shared bookkeeping: a fair agent's copy of the feasible set."""

    def __init__(self, view: PublicView, policy: str, cap: int):
        if policy not in ("mixed", "facts_only", "relations_only"):
            raise ValueError(f"unknown candidate policy: {policy!r}")
        self.view = view
        self.policy = policy
        self.cap = cap
        self.solutions: list | None = None
        self.pending: Query | None = None
        self.asked: set = set()

    def _ensure_solutions(self) -> None:
        if self.solutions is not None:
            return
        grids, overflowed = solver.enumerate_solutions(
            list(self.view.visible_constraints), self.view.dims, cap=self.cap
        )
        if overflowed:
            raise RuntimeError(f"feasible set exceeds {self.cap}; cannot mirror the count")
        self.solutions = grids

    def absorb_answer(self, conversation) -> None:
        if self.pending is None:
            return
        answer = _last_answer(conversation)
        implied = solver.implied_constraint(self.pending, answer)
        self.solutions = [g for g in self.solutions if solver.holds(implied, g)]
        self.pending = None

    def remember(self, query: Query) -> None:
        self.asked.add(query.serialize())
        self.pending = query

    def solved(self) -> bool:
        return len(self.solutions) == 1

    def solution_message(self, think: str) -> str:
        return make_message(think=think, solution=self.solutions[0].to_record())


def _informative_facts(dims: PuzzleDims, solutions) -> list[tuple[Query, int]]:
    """Fact candidates over undetermined cells, with their true-branch counts."""
    out = []
    for house in range(1, dims.n_houses + 1):
        for attr in dims.attributes:
            tallies: dict = {}
            for grid in solutions:
                value = grid.value_at(house, attr)
                tallies[value] = tallies.get(value, 0) + 1
            if len(tallies) < 2:
                continue
            for value in sorted(tallies):
                query = Query(qtype="fact", rel=Kind.FOUND_AT.value, lhs=Entity(attr, value), house=house)
                out.append((query, tallies[value]))
    return out


def _informative_relations(dims: PuzzleDims, solutions) -> list[tuple[Query, int]]:
    """Relation candidates over entity pairs the current set leaves open."""
    entities = [Entity(attr, value) for attr in dims.attributes for value in dims.domains[attr]]
    positions = [grid._pos for grid in solutions]
    total = len(solutions)
    out = []
    for i, lhs in enumerate(entities):
        for rhs in entities[i + 1 :]:
            for kind in RELATION_KINDS:
                true_count = 0
                for pos in positions:
                    if solver.kind_holds(kind, pos[lhs.key()], pos[rhs.key()]):
                        true_count += 1
                if 0 < true_count < total:
                    query = Query(qtype="relation", rel=kind.value, lhs=lhs, rhs=rhs)
                    out.append((query, true_count))
    return out


class GreedyIGAgent:
    """Minimax information-gain player.

    Scores each candidate by its worst-case post-answer count
    max(S(C ∪ q), S(C ∪ ¬q)) and asks the minimizer, breaking ties by the
    lexicographically least query serialization.  Never repeats a query;
    submits the witness as soon as one grid remains.
    """

    def __init__(self, view: PublicView, policy: str = "mixed", seed: int = 0,
                 cap: int = solver.DEFAULT_CAP):
        self.mirror = _MirrorAgent(view, policy, cap)
        self.rng = random.Random(seed)

    def __call__(self, conversation) -> str:
        mirror = self.mirror
        mirror._ensure_solutions()
        mirror.absorb_answer(conversation)
        if mirror.solved():
            return mirror.solution_message("one feasible grid left; submitting")
        dims = mirror.view.dims
        candidates: list[tuple[Query, int]] = []
        if mirror.policy in ("mixed", "facts_only"):
            candidates.extend(_informative_facts(dims, mirror.solutions))
        if mirror.policy in ("mixed", "relations_only"):
            candidates.extend(_informative_relations(dims, mirror.solutions))
        candidates = [(q, ct) for q, ct in candidates if q.serialize() not in mirror.asked]
        if not candidates:
            raise RuntimeError("no informative candidate query left while count > 1")
        if len(candidates) > CANDIDATE_CAP:
            candidates = self.rng.sample(candidates, CANDIDATE_CAP)
        total = len(mirror.solutions)
        # One count per candidate: the false branch is total - true_count.
        best = min(candidates, key=lambda item: (max(item[1], total - item[1]), item[0].serialize()))
        query = best[0]
        mirror.remember(query)
        worst = max(best[1], total - best[1])
        return make_message(
            think=f"{total} grids feasible; worst case after this query is {worst}",
            query=query.to_record(),
        )


class RandomAgent:
    """Uniformly samples syntactically valid, unseen queries until solved."""

    def __init__(self, view: PublicView, policy: str = "mixed", seed: int = 0,
                 cap: int = solver.DEFAULT_CAP):
        self.mirror = _MirrorAgent(view, policy, cap)
        dims = view.dims
        pool: list[Query] = []
        if policy in ("mixed", "facts_only"):
            for house in range(1, dims.n_houses + 1):
                for attr in dims.attributes:
                    for value in dims.domains[attr]:
                        pool.append(Query(qtype="fact", rel=Kind.FOUND_AT.value,
                                          lhs=Entity(attr, value), house=house))
        if policy in ("mixed", "relations_only"):
            entities = [Entity(a, v) for a in dims.attributes for v in dims.domains[a]]
            for lhs in entities:
                for rhs in entities:
                    if lhs == rhs:
                        continue
                    for kind in RELATION_KINDS:
                        pool.append(Query(qtype="relation", rel=kind.value, lhs=lhs, rhs=rhs))
        rng = random.Random(seed)
        rng.shuffle(pool)
        self.pool = pool

    def __call__(self, conversation) -> str:
        mirror = self.mirror
        mirror._ensure_solutions()
        mirror.absorb_answer(conversation)
        if mirror.solved():
            return mirror.solution_message("one feasible grid left; submitting")
        while self.pool:
            query = self.pool.pop()
            if query.serialize() in mirror.asked:
                continue
            mirror.remember(query)
            return make_message(
                think=f"{len(mirror.solutions)} grids feasible; asking at random",
                query=query.to_record(),
            )
        raise RuntimeError("query pool exhausted while count > 1")


class ReplayAgent:
    """Replays a fixed transcript of agent message texts."""

    def __init__(self, messages):
        self.messages = list(messages)
        self.step = 0

    def __call__(self, conversation) -> str:
        if self.step >= len(self.messages):
            raise RuntimeError("replay transcript exhausted")
        text = self.messages[self.step]
        self.step += 1
        return text


@dataclass(frozen=True)
class AgentSpec:
    kind: str  # cheating_oracle | greedy_ig | random | replay
    seed: int = 0
    candidate_policy: str = "mixed"
    transcript: tuple = ()

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> "AgentSpec":
        kind = text.strip()
        policy = "mixed"
        if ":" in kind:
            kind, policy = kind.split(":", 1)
        return cls(kind=kind, seed=seed, candidate_policy=policy)


def default_policy_for_env(env_type: str) -> str:
    return {"normal": "mixed", "only_fact": "facts_only", "only_relation": "relations_only"}[env_type]


def build_agent(spec: AgentSpec, puzzle: Puzzle, env_type: str = "normal"):
    policy = spec.candidate_policy
    if policy == "mixed" and env_type != "normal":
        policy = default_policy_for_env(env_type)
    if spec.kind == "cheating_oracle":
        return CheatingOracleAgent(puzzle)
    if spec.kind == "greedy_ig":
        return GreedyIGAgent(PublicView.of(puzzle), policy=policy, seed=spec.seed)
    if spec.kind == "random":
        return RandomAgent(PublicView.of(puzzle), policy=policy, seed=spec.seed)
    if spec.kind == "replay":
        return ReplayAgent(spec.transcript)
    raise ValueError(f"unknown agent kind: {spec.kind!r}")
