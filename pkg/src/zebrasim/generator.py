"""Procedural puzzle generation with certified hidden-information counts.

The pipeline per instance: sample a ground-truth grid, sample true clues
until the set pins that grid uniquely, greedily drop redundant clues in a
seeded random order, then mask a subset as missing.  Because the reduced
set is irredundant, every clue is necessary, so the masked instance is
certified: the visible clues leave more than one feasible grid and each
missing clue is individually required for uniqueness.  All randomness
flows from explicit seeds; the same config and seed reproduce the same
dataset byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
from dataclasses import dataclass, field, replace

from .core import (
    Clue,
    Constraint,
    DATASET_VERSION,
    Entity,
    Kind,
    Puzzle,
    PuzzleDims,
    SolutionGrid,
    ZebraSimError,
    canonicalize_token,
    house_to_wire,
    validate_puzzle,
)
from . import solver

# Values are globally unique across pools so clue text can be parsed back
# without attribute annotations on every mention.
DOMAIN_CATALOG = {
    "name": ("eric", "arnold", "peter", "alice", "bob", "carol"),
    "color": ("red", "green", "blue", "yellow", "white", "purple"),
    "smoothie": ("dragonfruit", "mango", "kiwi", "banana", "cherry", "lime"),
    "animal": ("dog", "cat", "fish", "bird", "horse", "rabbit"),
    "drink": ("tea", "coffee", "milk", "water", "juice", "soda"),
    "food": ("pizza", "pasta", "salad", "soup", "stew", "curry"),
}

SIZE_PRESETS = {"small": (3, 3), "medium": (4, 4), "large": (5, 5)}
DEFAULT_MISSING_RANGES = {"small": (1, 2), "medium": (1, 4), "large": (1, 6)}

GENERATION_RESTARTS = 16
MASKING_RETRIES = 64


class GenerationExhausted(ZebraSimError):
    """Clue sampling could not reach a uniquely solvable set."""


class MaskingExhausted(ZebraSimError):
    """No admissible mask found within the retry budget."""


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int = 0
    size: str = "small"
    n_missing: int = 1
    necessity_enforced: bool = True
    clue_kind_weights: dict = field(default_factory=dict)
    domain_catalog: dict = field(default_factory=lambda: dict(DOMAIN_CATALOG))
    count_cap: int = solver.DEFAULT_CAP
    masking_retries: int = MASKING_RETRIES
    generation_restarts: int = GENERATION_RESTARTS

    def dims_shape(self) -> tuple[int, int]:
        if self.size in SIZE_PRESETS:
            return SIZE_PRESETS[self.size]
        match = re.fullmatch(r"(\d+)x(\d+)", self.size)
        if not match:
            raise ValueError(f"unknown size {self.size!r}; use a preset or 'NxM'")
        n, m = int(match.group(1)), int(match.group(2))
        if not 2 <= n <= 6:
            raise ValueError(f"n_houses must be in 2..6, got {n}")
        if not 1 <= m <= len(self.domain_catalog):
            raise ValueError(f"n_attributes must be in 1..{len(self.domain_catalog)}, got {m}")
        return n, m


def derive_seed(master_seed: int, *parts) -> int:
    """Stable per-instance seed; never uses Python's salted hash()."""
    text = ":".join([str(master_seed)] + [str(p) for p in parts])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def _sample_frame(config: GeneratorConfig, rng: random.Random):
    """Pick attributes, domains, and a ground-truth grid."""
    n, m = config.dims_shape()
    themes = sorted(config.domain_catalog)
    picked = rng.sample(themes, m)
    attributes = tuple(picked)
    domains = {}
    for attr in attributes:
        pool = list(config.domain_catalog[attr])
        if len(pool) < n:
            raise ValueError(f"domain pool for {attr!r} has fewer than {n} values")
        domains[attr] = tuple(rng.sample(pool, n))
    cells = {}
    for attr in attributes:
        order = list(domains[attr])
        rng.shuffle(order)
        for house, value in enumerate(order, start=1):
            cells[(house, attr)] = value
    grid = SolutionGrid(n_houses=n, attributes=attributes, cells=cells)
    return PuzzleDims(n, attributes, domains), grid


def sample_solution_grid(config: GeneratorConfig) -> SolutionGrid:
    """Seeded uniform grid: an independent permutation per attribute."""
    rng = random.Random(config.seed)
    _dims, grid = _sample_frame(config, rng)
    return grid


def _candidate_clues(dims: PuzzleDims, grid: SolutionGrid) -> dict:
    """Every true clue instantiation, grouped by kind.

    Operand pairs run over all entity pairs in a fixed orientation;
    same-attribute pairs are kept for positional kinds (they carry real
    ordering information) but dropped for same_house/not_at, where the
    all-different rule makes them vacuous.
    """
    entities = [Entity(attr, value) for attr in dims.attributes for value in dims.domains[attr]]
    pools: dict = {kind: [] for kind in Kind}
    for house in range(1, dims.n_houses + 1):
        for attr in dims.attributes:
            pools[Kind.FOUND_AT].append(
                Constraint(id="", kind=Kind.FOUND_AT, lhs=Entity(attr, grid.value_at(house, attr)), house=house)
            )
    for i, lhs in enumerate(entities):
        h1 = grid.house_of(lhs.attr, lhs.value)
        for rhs in entities[i + 1 :]:
            h2 = grid.house_of(rhs.attr, rhs.value)
            cross = lhs.attr != rhs.attr
            for kind in (Kind.SAME_HOUSE, Kind.NOT_AT):
                if cross and solver.kind_holds(kind, h1, h2):
                    pools[kind].append(Constraint(id="", kind=kind, lhs=lhs, rhs=rhs))
            for kind in (
                Kind.DIRECT_LEFT,
                Kind.DIRECT_RIGHT,
                Kind.SIDE_BY_SIDE,
                Kind.LEFT_OF,
                Kind.RIGHT_OF,
                Kind.ONE_BETWEEN,
                Kind.TWO_BETWEEN,
            ):
                if solver.kind_holds(kind, h1, h2):
                    pools[kind].append(Constraint(id="", kind=kind, lhs=lhs, rhs=rhs))
    return pools


def generate_clue_set(dims: PuzzleDims, grid: SolutionGrid, config: GeneratorConfig, rng: random.Random):
    """Sample true clues until unique, then greedily drop redundant ones.

    The returned list is irredundant: removing any single clue breaks
    uniqueness.  Raises GenerationExhausted if the weighted pool runs dry
    before the grid is pinned.
    """
    pools = _candidate_clues(dims, grid)
    weights = {kind: float(config.clue_kind_weights.get(kind.value, 1.0)) for kind in Kind}
    for kind in pools:
        rng.shuffle(pools[kind])

    working = solver.ConstraintSet()
    chosen: list[Constraint] = []
    while True:
        live = [kind for kind in Kind if pools[kind] and weights[kind] > 0]
        if not live:
            raise GenerationExhausted("candidate clue pool exhausted before the grid was pinned")
        kind = rng.choices(live, weights=[weights[k] for k in live])[0]
        candidate = pools[kind].pop()
        if not working.add(candidate):
            continue
        chosen.append(candidate)
        unique, _witness = solver.is_unique(working.constraints, dims)
        if unique:
            break

    order = list(chosen)
    rng.shuffle(order)
    kept = list(chosen)
    for candidate in order:
        trial = [c for c in kept if c is not candidate]
        unique, _witness = solver.is_unique(trial, dims)
        if unique:
            kept = trial
    return [replace(c, id=f"c{i}") for i, c in enumerate(kept, start=1)]


def mask_clues(full: list[Constraint], n_missing: int, dims: PuzzleDims, config: GeneratorConfig, rng: random.Random):
    """Pick the missing subset; resample until the instance is certified.

    Requires the visible remainder to admit more than one grid (counted
    exactly) and, when necessity is enforced, every missing clue to be
    individually necessary.  Raises MaskingExhausted after the retry
    budget rather than silently relaxing either check.
    """
    if n_missing < 1 or n_missing > len(full) // 2:
        raise ValueError(f"n_missing={n_missing} outside 1..{len(full) // 2} for {len(full)} clues")
    for _attempt in range(config.masking_retries):
        missing_idx = sorted(rng.sample(range(len(full)), n_missing))
        missing = [full[i] for i in missing_idx]
        visible = [c for i, c in enumerate(full) if i not in set(missing_idx)]
        if config.necessity_enforced:
            necessary = True
            for gone in missing:
                rest = [c for c in full if c.id != gone.id]
                check = solver.count_solutions(rest, dims, cap=2)
                if check.count <= 1 and not check.overflowed:
                    necessary = False
                    break
            if not necessary:
                continue
        initial = solver.count_solutions(visible, dims, cap=config.count_cap)
        if initial.overflowed or initial.count <= 1:
            continue
        return (
            tuple(c.id for c in visible),
            tuple(c.id for c in missing),
            initial.count,
        )
    raise MaskingExhausted(f"no admissible mask after {config.masking_retries} tries")


def generate_puzzle(config: GeneratorConfig, puzzle_id: str | None = None) -> Puzzle:
    """Generate one certified instance from a config and its seed."""
    rng = random.Random(config.seed)
    last_error: Exception | None = None
    for _attempt in range(config.generation_restarts):
        dims, grid = _sample_frame(config, rng)
        try:
            full = generate_clue_set(dims, grid, config, rng)
        except GenerationExhausted as exc:
            last_error = exc
            continue
        if len(full) // 2 < config.n_missing:
            last_error = MaskingExhausted(
                f"reduced clue set has {len(full)} clues; cannot hide {config.n_missing}"
            )
            continue
        try:
            visible_ids, missing_ids, initial_count = mask_clues(full, config.n_missing, dims, config, rng)
        except MaskingExhausted as exc:
            last_error = exc
            continue
        clues = tuple(Clue(constraint=c, text=render_clue_text(c, dims)) for c in full)
        pid = puzzle_id or f"{config.size}-m{config.n_missing}-{config.seed:016x}"
        puzzle = Puzzle(
            id=pid,
            n_houses=dims.n_houses,
            attributes=dims.attributes,
            domains=dims.domains,
            full_clues=clues,
            visible_ids=visible_ids,
            missing_ids=missing_ids,
            solution=grid,
            k_star=len(missing_ids),
            initial_count=initial_count,
            necessity_enforced=config.necessity_enforced,
            size_label=config.size if config.size in SIZE_PRESETS else None,
            generator_meta={"seed": config.seed, "preset": config.size, "version": DATASET_VERSION},
        )
        problems = validate_puzzle(puzzle)
        if problems:
            raise ZebraSimError(f"generated puzzle failed validation: {problems}")
        return puzzle
    raise GenerationExhausted(
        f"no instance after {config.generation_restarts} restarts (last: {last_error})"
    )


# --- clue text ---------------------------------------------------------

def _entity_phrase(entity: Entity) -> str:
    # Person names read as bare tokens; everything else gets a noun phrase.
    if entity.attr == "name":
        return entity.value
    return f"the {entity.value} {entity.attr} lover"


def _sentence(text: str) -> str:
    return text[0].upper() + text[1:]


def render_clue_text(constraint: Constraint, dims: PuzzleDims) -> str:
    """Deterministic English for an asserted clue; round-trips via parse."""
    if constraint.polarity != "asserted":
        raise ValueError("only asserted clues have a text rendering")
    c = constraint
    if c.kind is Kind.FOUND_AT:
        return _sentence(f"the {c.lhs.value} house is {house_to_wire(c.house)}.")
    lhs, rhs = _entity_phrase(c.lhs), _entity_phrase(c.rhs)
    if c.kind is Kind.SAME_HOUSE:
        return _sentence(f"{lhs} is {rhs}.")
    if c.kind is Kind.NOT_AT:
        return _sentence(f"{lhs} is not {rhs}.")
    if c.kind is Kind.DIRECT_LEFT:
        return _sentence(f"{lhs} is directly left of {rhs}.")
    if c.kind is Kind.DIRECT_RIGHT:
        return _sentence(f"{lhs} is directly right of {rhs}.")
    if c.kind is Kind.SIDE_BY_SIDE:
        return _sentence(f"{lhs} and {rhs} are next to each other.")
    if c.kind is Kind.LEFT_OF:
        return _sentence(f"{lhs} is somewhere to the left of {rhs}.")
    if c.kind is Kind.RIGHT_OF:
        return _sentence(f"{lhs} is somewhere to the right of {rhs}.")
    if c.kind is Kind.ONE_BETWEEN:
        return _sentence(f"there is one house between {lhs} and {rhs}.")
    if c.kind is Kind.TWO_BETWEEN:
        return _sentence(f"there are two houses between {lhs} and {rhs}.")
    raise ValueError(f"unhandled kind: {c.kind}")


class ClueParseError(ZebraSimError):
    pass


def _parse_entity(phrase: str, dims: PuzzleDims, value_to_attr: dict) -> Entity:
    phrase = phrase.strip()
    if phrase.startswith("the ") and phrase.endswith(" lover"):
        middle = phrase[4:-6]
        if " " not in middle:
            raise ClueParseError(f"cannot split entity phrase: {phrase!r}")
        value, attr = middle.rsplit(" ", 1)
        if attr not in dims.attributes:
            raise ClueParseError(f"unknown attribute in phrase: {phrase!r}")
        if value not in dims.domains[attr]:
            raise ClueParseError(f"unknown value {value!r} for {attr!r}")
        return Entity(attr, value)
    attr = value_to_attr.get(phrase)
    if attr is None:
        raise ClueParseError(f"unknown bare value: {phrase!r}")
    return Entity(attr, phrase)


def parse_clue_text(text: str, dims: PuzzleDims) -> Constraint:
    """Invert render_clue_text.  Only templated renderings are supported."""
    value_to_attr = {}
    for attr in dims.attributes:
        for value in dims.domains[attr]:
            value_to_attr[value] = attr
    norm = " ".join(text.lower().split())
    if not norm.endswith("."):
        raise ClueParseError(f"clue text must end with a period: {text!r}")
    body = norm[:-1]

    match = re.fullmatch(r"the (.+) house is house(\d+)", body)
    if match:
        value = match.group(1)
        attr = value_to_attr.get(value)
        if attr is None:
            raise ClueParseError(f"unknown value in fact clue: {value!r}")
        house = int(match.group(2))
        if not 1 <= house <= dims.n_houses:
            raise ClueParseError(f"house {house} outside 1..{dims.n_houses}")
        return Constraint(id="", kind=Kind.FOUND_AT, lhs=Entity(attr, value), house=house)

    patterns = [
        (r"there is one house between (.+) and (.+)", Kind.ONE_BETWEEN),
        (r"there are two houses between (.+) and (.+)", Kind.TWO_BETWEEN),
        (r"(.+) and (.+) are next to each other", Kind.SIDE_BY_SIDE),
        (r"(.+) is directly left of (.+)", Kind.DIRECT_LEFT),
        (r"(.+) is directly right of (.+)", Kind.DIRECT_RIGHT),
        (r"(.+) is somewhere to the left of (.+)", Kind.LEFT_OF),
        (r"(.+) is somewhere to the right of (.+)", Kind.RIGHT_OF),
        (r"(.+) is not (.+)", Kind.NOT_AT),
        (r"(.+?) is (.+)", Kind.SAME_HOUSE),
    ]
    for pattern, kind in patterns:
        match = re.fullmatch(pattern, body)
        if not match:
            continue
        lhs = _parse_entity(match.group(1), dims, value_to_attr)
        rhs = _parse_entity(match.group(2), dims, value_to_attr)
        return Constraint(id="", kind=kind, lhs=lhs, rhs=rhs)
    raise ClueParseError(f"no template matches: {text!r}")


# --- dataset files -----------------------------------------------------

def puzzle_to_record(puzzle: Puzzle) -> dict:
    clue_rows = []
    visible = set(puzzle.visible_ids)
    for clue in puzzle.full_clues:
        row = clue.constraint.to_record()
        clue_rows.append(
            {
                "id": row["id"],
                "text": clue.text,
                "parsed": row["parsed"],
                "type": row["type"],
                "visible": clue.constraint.id in visible,
            }
        )
    return {
        "id": puzzle.id,
        "n_houses": puzzle.n_houses,
        "attributes": list(puzzle.attributes),
        "domains": {a: list(puzzle.domains[a]) for a in puzzle.attributes},
        "clues": clue_rows,
        "solution": puzzle.solution.to_record(),
        "k_star": puzzle.k_star,
        "initial_count": puzzle.initial_count,
        "necessity_enforced": puzzle.necessity_enforced,
        "generator": dict(puzzle.generator_meta) or {"seed": 0, "preset": None, "version": DATASET_VERSION},
    }


def puzzle_from_record(record: dict) -> Puzzle:
    n_houses = record["n_houses"]
    attributes = tuple(record["attributes"])
    domains = {a: tuple(v) for a, v in record["domains"].items()}
    clues = []
    visible_ids = []
    missing_ids = []
    for row in record["clues"]:
        constraint = Constraint.from_record(row, n_houses)
        clues.append(Clue(constraint=constraint, text=row["text"]))
        (visible_ids if row["visible"] else missing_ids).append(constraint.id)
    meta = record.get("generator", {})
    preset = meta.get("preset")
    return Puzzle(
        id=record["id"],
        n_houses=n_houses,
        attributes=attributes,
        domains=domains,
        full_clues=tuple(clues),
        visible_ids=tuple(visible_ids),
        missing_ids=tuple(missing_ids),
        solution=SolutionGrid.from_record(record["solution"]),
        k_star=record["k_star"],
        initial_count=record["initial_count"],
        necessity_enforced=record["necessity_enforced"],
        size_label=preset if preset in SIZE_PRESETS else None,
        generator_meta=meta,
    )


def emit_dataset(puzzles, path) -> dict:
    """Write one JSON record per line; returns a manifest of cell counts."""
    cells: dict = {}
    with open(path, "w", encoding="utf-8") as handle:
        for puzzle in puzzles:
            handle.write(json.dumps(puzzle_to_record(puzzle), separators=(",", ":")) + "\n")
            per_size = cells.setdefault(puzzle.size, {})
            key = str(puzzle.k_star)
            per_size[key] = per_size.get(key, 0) + 1
    return {"records": sum(sum(v.values()) for v in cells.values()), "cells": cells, "version": DATASET_VERSION}


def load_dataset(path) -> list[Puzzle]:
    puzzles = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                puzzles.append(puzzle_from_record(record))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError, ZebraSimError) as exc:
                raise ValueError(f"{path}: line {line_no}: bad dataset record: {exc}") from exc
    return puzzles


def generate_dataset(spec: dict) -> list[Puzzle]:
    """Generate a dataset from a declarative spec.

    Spec shape: {"seed": int, "cells": [{"size": str, "n_missing": int,
    "count": int}, ...], optional "necessity_enforced", "clue_kind_weights"}.
    Omitting "cells" but naming "sizes" expands every default n_missing
    value for those presets.
    """
    seed = spec.get("seed", 0)
    cells = spec.get("cells")
    if cells is None:
        sizes = spec.get("sizes")
        if not sizes:
            raise ValueError("dataset spec needs either 'cells' or 'sizes'")
        count = spec.get("count_per_cell", 1)
        cells = []
        for size in sizes:
            low, high = DEFAULT_MISSING_RANGES.get(size, (1, 1))
            for n_missing in range(low, high + 1):
                cells.append({"size": size, "n_missing": n_missing, "count": count})
    puzzles = []
    for cell in cells:
        size = cell["size"]
        n_missing = cell["n_missing"]
        for index in range(cell["count"]):
            config = GeneratorConfig(
                seed=derive_seed(seed, size, n_missing, index),
                size=size,
                n_missing=n_missing,
                necessity_enforced=spec.get("necessity_enforced", True),
                clue_kind_weights=spec.get("clue_kind_weights", {}),
            )
            pid = f"{size}-m{n_missing}-{index:04d}"
            puzzles.append(generate_puzzle(config, puzzle_id=pid))
    return puzzles
