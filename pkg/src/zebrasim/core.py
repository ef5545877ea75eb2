"""Data model for partially observed logic-grid (zebra) puzzles.

A puzzle places one value of every attribute in each of N ordered houses,
all-different per attribute.  Clues are typed constraints over
attribute--value entities; some clues are withheld and can only be
recovered by querying an oracle.  Everything here is a plain immutable
value object so puzzles can be shared freely across workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Literal

PROTOCOL_VERSION = 1
DATASET_VERSION = "1"


class ZebraSimError(Exception):
    """Base class for every error this package raises on purpose."""


class InvalidToken(ZebraSimError):
    """A token was empty after canonical normalization."""


class UnknownEntity(ZebraSimError):
    """An attribute or value is not part of the puzzle's domains."""


def canonicalize_token(raw: str) -> str:
    """Normalize a token: lowercase, strip, collapse internal whitespace runs.

    Idempotent.  Raises InvalidToken if nothing is left afterwards.
    """
    tok = " ".join(raw.lower().split())
    if not tok:
        raise InvalidToken(f"empty token after normalization: {raw!r}")
    return tok


def house_to_wire(house: int) -> str:
    return f"house{house}"


def house_from_wire(token: str, n_houses: int) -> int | None:
    """Parse 'house3' into 3, or None when malformed or out of range."""
    if not token.startswith("house"):
        return None
    digits = token[5:]
    if not digits.isdigit():
        return None
    h = int(digits)
    if digits != str(h) or not 1 <= h <= n_houses:
        return None
    return h


class Kind(str, Enum):
    """Constraint kinds: one fact kind plus the nine canonical relations."""

    FOUND_AT = "found_at"
    SAME_HOUSE = "same_house"
    NOT_AT = "not_at"
    DIRECT_LEFT = "direct_left"
    DIRECT_RIGHT = "direct_right"
    SIDE_BY_SIDE = "side_by_side"
    LEFT_OF = "left_of"
    RIGHT_OF = "right_of"
    ONE_BETWEEN = "one_between"
    TWO_BETWEEN = "two_between"


RELATION_KINDS: tuple[Kind, ...] = tuple(k for k in Kind if k is not Kind.FOUND_AT)
RELATION_NAMES: tuple[str, ...] = tuple(k.value for k in RELATION_KINDS)

# Swapping the operands of these kinds does not change the meaning.
SYMMETRIC_KINDS = frozenset(
    {Kind.SAME_HOUSE, Kind.NOT_AT, Kind.SIDE_BY_SIDE, Kind.ONE_BETWEEN, Kind.TWO_BETWEEN}
)

Polarity = Literal["asserted", "negated"]


@dataclass(frozen=True)
class Entity:
    """An attribute--value pair such as (color, red).  Tokens are canonical."""

    attr: str
    value: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "attr", canonicalize_token(self.attr))
        object.__setattr__(self, "value", canonicalize_token(self.value))

    def key(self) -> tuple[str, str]:
        return (self.attr, self.value)

    def to_record(self) -> dict:
        return {"attr": self.attr, "value": self.value}


@dataclass(frozen=True)
class Constraint:
    """One typed clue.  FOUND_AT pins lhs to a house; relations pair lhs/rhs."""

    id: str
    kind: Kind
    lhs: Entity
    rhs: Entity | None = None
    house: int | None = None
    polarity: Polarity = "asserted"

    def __post_init__(self) -> None:
        if self.kind is Kind.FOUND_AT:
            if self.rhs is not None or self.house is None:
                raise ValueError(f"found_at takes a house and no rhs: {self!r}")
            if self.house < 1:
                raise ValueError(f"house index must be >= 1: {self.house}")
        else:
            if self.rhs is None or self.house is not None:
                raise ValueError(f"{self.kind.value} takes lhs and rhs, no house: {self!r}")
        if self.polarity not in ("asserted", "negated"):
            raise ValueError(f"bad polarity: {self.polarity!r}")

    def negated(self) -> "Constraint":
        flip = "negated" if self.polarity == "asserted" else "asserted"
        return replace(self, polarity=flip)

    def signature(self) -> tuple:
        """Canonical identity ignoring the id; symmetric kinds sort operands."""
        if self.kind is Kind.FOUND_AT:
            return (self.kind.value, self.polarity, self.house, self.lhs.key())
        a, b = self.lhs.key(), self.rhs.key()
        if self.kind in SYMMETRIC_KINDS and b < a:
            a, b = b, a
        return (self.kind.value, self.polarity, a, b)

    def to_record(self) -> dict:
        """Wire record: {id, parsed, type}."""
        if self.kind is Kind.FOUND_AT:
            parsed = {
                "rel": self.kind.value,
                "house": house_to_wire(self.house),
                "attr": self.lhs.attr,
                "value": self.lhs.value,
            }
            ctype = "fact"
        else:
            parsed = {
                "lhs": self.lhs.to_record(),
                "rel": self.kind.value,
                "rhs": self.rhs.to_record(),
            }
            ctype = "relation"
        record = {"id": self.id, "parsed": parsed, "type": ctype}
        if self.polarity != "asserted":
            record["polarity"] = self.polarity
        return record

    @classmethod
    def from_record(cls, record: dict, n_houses: int) -> "Constraint":
        parsed = record["parsed"]
        polarity = record.get("polarity", "asserted")
        if record["type"] == "fact":
            house = house_from_wire(parsed["house"], n_houses)
            if house is None:
                raise ValueError(f"bad house token: {parsed['house']!r}")
            return cls(
                id=record["id"],
                kind=Kind.FOUND_AT,
                lhs=Entity(parsed["attr"], parsed["value"]),
                house=house,
                polarity=polarity,
            )
        return cls(
            id=record["id"],
            kind=Kind(parsed["rel"]),
            lhs=Entity(parsed["lhs"]["attr"], parsed["lhs"]["value"]),
            rhs=Entity(parsed["rhs"]["attr"], parsed["rhs"]["value"]),
            polarity=polarity,
        )


@dataclass(frozen=True)
class Query:
    """One oracle query.  Facts name a cell; relations pair two entities."""

    qtype: Literal["fact", "relation"]
    rel: str
    lhs: Entity
    rhs: Entity | None = None
    house: int | None = None

    def to_constraint(self, cid: str = "", polarity: Polarity = "asserted") -> Constraint:
        return Constraint(
            id=cid,
            kind=Kind(self.rel),
            lhs=self.lhs,
            rhs=self.rhs,
            house=self.house,
            polarity=polarity,
        )

    def to_record(self) -> dict:
        if self.qtype == "fact":
            return {
                "type": "fact",
                "rel": self.rel,
                "house": house_to_wire(self.house),
                "attr": self.lhs.attr,
                "value": self.lhs.value,
            }
        return {
            "type": "relation",
            "rel": self.rel,
            "lhs": self.lhs.to_record(),
            "rhs": self.rhs.to_record(),
        }

    def serialize(self) -> str:
        """Canonical string form, used for dedup and deterministic tie-breaks."""
        return json.dumps(self.to_record(), sort_keys=True, separators=(",", ":"))


def query_for_constraint(constraint: Constraint) -> Query:
    """The query whose asserted answer is exactly this constraint."""
    if constraint.kind is Kind.FOUND_AT:
        return Query(
            qtype="fact",
            rel=Kind.FOUND_AT.value,
            lhs=constraint.lhs,
            house=constraint.house,
        )
    return Query(
        qtype="relation",
        rel=constraint.kind.value,
        lhs=constraint.lhs,
        rhs=constraint.rhs,
    )


@dataclass(frozen=True)
class PuzzleDims:
    """Shape of a puzzle: houses, ordered attributes, per-attribute domains."""

    n_houses: int
    attributes: tuple[str, ...]
    domains: dict[str, tuple[str, ...]]

    def header(self) -> list[str]:
        return ["House"] + list(self.attributes)


@dataclass(frozen=True)
class SolutionGrid:
    """A complete assignment of values to houses, one per attribute."""

    n_houses: int
    attributes: tuple[str, ...]
    cells: dict  # (house, attr) -> value
    _pos: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        pos = {}
        for (house, attr), value in self.cells.items():
            pos[(attr, value)] = house
        object.__setattr__(self, "_pos", pos)

    def value_at(self, house: int, attr: str) -> str:
        return self.cells[(house, attr)]

    def house_of(self, attr: str, value: str) -> int:
        try:
            return self._pos[(attr, value)]
        except KeyError:
            raise UnknownEntity(f"no entity ({attr!r}, {value!r}) in this grid") from None

    def row(self, house: int) -> list[str]:
        return [str(house)] + [self.cells[(house, a)] for a in self.attributes]

    def to_record(self) -> dict:
        return {
            "header": ["House"] + list(self.attributes),
            "rows": [self.row(h) for h in range(1, self.n_houses + 1)],
        }

    @classmethod
    def from_record(cls, record: dict) -> "SolutionGrid":
        attributes = tuple(record["header"][1:])
        cells = {}
        for row in record["rows"]:
            house = int(row[0])
            for attr, value in zip(attributes, row[1:]):
                cells[(house, attr)] = value
        return cls(n_houses=len(record["rows"]), attributes=attributes, cells=cells)

    def validate(self) -> list[str]:
        """Check fill and the all-different property; returns problems found."""
        problems = []
        for house in range(1, self.n_houses + 1):
            for attr in self.attributes:
                if (house, attr) not in self.cells:
                    problems.append(f"cell ({house}, {attr}) is empty")
        for attr in self.attributes:
            seen = {}
            for house in range(1, self.n_houses + 1):
                value = self.cells.get((house, attr))
                if value is None:
                    continue
                if value in seen:
                    problems.append(
                        f"value {value!r} of {attr!r} repeats in houses {seen[value]} and {house}"
                    )
                seen[value] = house
        return problems


@dataclass(frozen=True)
class Clue:
    """A constraint together with its English rendering."""

    constraint: Constraint
    text: str


@dataclass
class Puzzle:
    """A generated instance: full clue set, visibility split, ground truth.

    Immutable by convention once constructed; nothing here mutates it.
    """

    id: str
    n_houses: int
    attributes: tuple[str, ...]
    domains: dict
    full_clues: tuple[Clue, ...]
    visible_ids: tuple[str, ...]
    missing_ids: tuple[str, ...]
    solution: SolutionGrid
    k_star: int
    initial_count: int
    necessity_enforced: bool = True
    aliases: dict = field(default_factory=dict)
    size_label: str | None = None
    generator_meta: dict = field(default_factory=dict)

    @property
    def dims(self) -> PuzzleDims:
        return PuzzleDims(self.n_houses, self.attributes, self.domains)

    def clue_by_id(self, cid: str) -> Clue:
        for clue in self.full_clues:
            if clue.constraint.id == cid:
                return clue
        raise KeyError(cid)

    def visible_clues(self) -> list[Clue]:
        wanted = set(self.visible_ids)
        return [c for c in self.full_clues if c.constraint.id in wanted]

    def missing_clues(self) -> list[Clue]:
        wanted = set(self.missing_ids)
        return [c for c in self.full_clues if c.constraint.id in wanted]

    def canonical_value(self, raw: str) -> str:
        """Canonicalize a wire token and apply this puzzle's alias map."""
        tok = canonicalize_token(raw)
        return self.aliases.get(tok, tok)

    @property
    def size(self) -> str:
        return self.size_label or f"{self.n_houses}x{len(self.attributes)}"


@dataclass(frozen=True)
class Violation:
    code: str
    detail: str

    def __str__(self) -> str:
        return f"{self.code}: {self.detail}"


def validate_puzzle(puzzle: Puzzle) -> list[Violation]:
    """Re-check every structural invariant of a Puzzle.

    Returns the violations found (empty list means the puzzle is sound).
    Uniqueness and sufficiency are re-counted with the solver, so this is
    the slow, trustworthy path meant for generators and tests.
    """
    from . import solver  # deferred: solver imports this module

    out = []
    grid_problems = puzzle.solution.validate()
    for problem in grid_problems:
        out.append(Violation("GridViolation", problem))
    if puzzle.solution.n_houses != puzzle.n_houses or puzzle.solution.attributes != puzzle.attributes:
        out.append(Violation("GridViolation", "solution grid shape differs from puzzle dims"))

    for attr in puzzle.attributes:
        domain = puzzle.domains.get(attr, ())
        if len(domain) != puzzle.n_houses:
            out.append(Violation("DomainViolation", f"domain of {attr!r} has {len(domain)} values"))
        if len(set(domain)) != len(domain):
            out.append(Violation("DomainViolation", f"domain of {attr!r} repeats values"))

    all_ids = [c.constraint.id for c in puzzle.full_clues]
    if len(set(all_ids)) != len(all_ids):
        out.append(Violation("PartitionViolation", "duplicate clue ids"))
    overlap = set(puzzle.visible_ids) & set(puzzle.missing_ids)
    if overlap:
        out.append(Violation("OverlapViolation", f"ids both visible and missing: {sorted(overlap)}"))
    if set(puzzle.visible_ids) | set(puzzle.missing_ids) != set(all_ids):
        out.append(Violation("PartitionViolation", "visible and missing ids do not partition the clue set"))

    k = len(puzzle.full_clues)
    n_missing = len(puzzle.missing_ids)
    if not 1 <= n_missing <= k // 2:
        out.append(Violation("MaskBoundsViolation", f"{n_missing} missing of {k} clues"))
    if puzzle.k_star != n_missing:
        out.append(Violation("KStarViolation", f"k_star={puzzle.k_star} but {n_missing} clues missing"))

    for clue in puzzle.full_clues:
        if clue.constraint.polarity != "asserted":
            out.append(Violation("CluePolarityViolation", f"clue {clue.constraint.id} is negated"))

    if grid_problems:
        return out  # the counts below would be meaningless

    for clue in puzzle.full_clues:
        try:
            if not solver.holds(clue.constraint, puzzle.solution):
                out.append(Violation("SoundnessViolation", f"clue {clue.constraint.id} fails on the solution"))
        except UnknownEntity as exc:
            out.append(Violation("SoundnessViolation", f"clue {clue.constraint.id}: {exc}"))

    full = [c.constraint for c in puzzle.full_clues]
    unique, witness = solver.is_unique(full, puzzle.dims)
    if not unique:
        out.append(Violation("UniquenessViolation", "full clue set does not pin a single grid"))
    elif witness != puzzle.solution:
        out.append(Violation("SolutionMismatchViolation", "full clue set pins a different grid"))

    visible = [c.constraint for c in puzzle.visible_clues()]
    visible_count = solver.count_solutions(visible, puzzle.dims, cap=2)
    if puzzle.initial_count <= 1:
        out.append(Violation("SufficiencyViolation", f"stored initial_count={puzzle.initial_count}"))
    if visible_count.count <= 1 and not visible_count.overflowed:
        out.append(Violation("SufficiencyViolation", "visible clues already pin a single grid"))
    return out
