"""Exact constraint semantics and feasible-grid counting.

Counting runs a depth-first search that places one (attribute, value)
pair at a time, pruning with every constraint whose operands are fully
placed.  Enumeration order is fixed -- attributes in puzzle order, values
in domain order, houses ascending -- so counts, witnesses, and full
enumerations are reproducible.  Counting stops with an explicit Overflow
once `cap` solutions have been found; it never truncates silently.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import (
    Constraint,
    Entity,
    Kind,
    Puzzle,
    PuzzleDims,
    Query,
    SolutionGrid,
    UnknownEntity,
    ZebraSimError,
)

DEFAULT_CAP = 10**6

_OP = {
    Kind.FOUND_AT: 0,
    Kind.SAME_HOUSE: 1,
    Kind.NOT_AT: 2,
    Kind.DIRECT_LEFT: 3,
    Kind.DIRECT_RIGHT: 4,
    Kind.SIDE_BY_SIDE: 5,
    Kind.LEFT_OF: 6,
    Kind.RIGHT_OF: 7,
    Kind.ONE_BETWEEN: 8,
    Kind.TWO_BETWEEN: 9,
}


def kind_holds(kind: Kind, h1: int, h2: int | None, house: int | None = None) -> bool:
    """Truth of an asserted kind given resolved house positions."""
    if kind is Kind.FOUND_AT:
        return h1 == house
    if kind is Kind.SAME_HOUSE:
        return h1 == h2
    if kind is Kind.NOT_AT:
        return h1 != h2
    if kind is Kind.DIRECT_LEFT:
        return h1 == h2 - 1
    if kind is Kind.DIRECT_RIGHT:
        return h1 == h2 + 1
    if kind is Kind.SIDE_BY_SIDE:
        return abs(h1 - h2) == 1
    if kind is Kind.LEFT_OF:
        return h1 < h2
    if kind is Kind.RIGHT_OF:
        return h1 > h2
    if kind is Kind.ONE_BETWEEN:
        return abs(h1 - h2) == 2
    if kind is Kind.TWO_BETWEEN:
        return abs(h1 - h2) == 3
    raise ValueError(f"unhandled kind: {kind}")


def holds(constraint: Constraint, grid: SolutionGrid) -> bool:
    """Evaluate one constraint against a complete grid.

    Raises UnknownEntity when an operand is not part of the grid.
    """
    h1 = grid.house_of(constraint.lhs.attr, constraint.lhs.value)
    h2 = None
    if constraint.rhs is not None:
        h2 = grid.house_of(constraint.rhs.attr, constraint.rhs.value)
    result = kind_holds(constraint.kind, h1, h2, constraint.house)
    if constraint.polarity == "negated":
        return not result
    return result


def implied_constraint(query: Query, answer: bool) -> Constraint:
    """The constraint a boolean answer lets you add to the working set."""
    polarity = "asserted" if answer else "negated"
    return query.to_constraint(cid="", polarity=polarity)


@dataclass(frozen=True)
class CountResult:
    """Outcome of a counting run.  `overflowed` means the cap was hit."""

    count: int
    cap: int
    overflowed: bool
    witnesses: tuple = ()

    @property
    def exact(self) -> bool:
        return not self.overflowed


class ConstraintSet:
    """Accumulated constraints, deduplicated on canonical signature."""

    def __init__(self, constraints=()):
        self._sigs: set = set()
        self.constraints: list[Constraint] = []
        self.cached_count: CountResult | None = None
        for c in constraints:
            self.add(c)

    def add(self, constraint: Constraint) -> bool:
        """Add one constraint; returns False when an equal one is present."""
        sig = constraint.signature()
        if sig in self._sigs:
            return False
        self._sigs.add(sig)
        self.constraints.append(constraint)
        self.cached_count = None
        return True

    def __contains__(self, constraint: Constraint) -> bool:
        return constraint.signature() in self._sigs

    def __len__(self) -> int:
        return len(self.constraints)

    def __iter__(self):
        return iter(self.constraints)

    def copy(self) -> "ConstraintSet":
        dup = ConstraintSet()
        dup._sigs = set(self._sigs)
        dup.constraints = list(self.constraints)
        dup.cached_count = self.cached_count
        return dup


def _compile(constraints, dims: PuzzleDims):
    """Lower constraints to index tuples (op, a1, v1, a2, v2, house, neg)."""
    aidx = {a: i for i, a in enumerate(dims.attributes)}
    vidx = {a: {v: i for i, v in enumerate(dims.domains[a])} for a in dims.attributes}

    def entity_index(entity: Entity) -> tuple[int, int]:
        if entity.attr not in aidx:
            raise UnknownEntity(f"unknown attribute {entity.attr!r}")
        if entity.value not in vidx[entity.attr]:
            raise UnknownEntity(f"unknown value {entity.value!r} for {entity.attr!r}")
        return aidx[entity.attr], vidx[entity.attr][entity.value]

    compiled = []
    for c in constraints:
        a1, v1 = entity_index(c.lhs)
        if c.kind is Kind.FOUND_AT:
            if not 1 <= c.house <= dims.n_houses:
                raise UnknownEntity(f"house {c.house} outside 1..{dims.n_houses}")
            compiled.append((0, a1, v1, 0, 0, c.house, c.polarity == "negated"))
        else:
            a2, v2 = entity_index(c.rhs)
            compiled.append((_OP[c.kind], a1, v1, a2, v2, 0, c.polarity == "negated"))
    return compiled


def _attr_order(compiled, m: int) -> list[int]:
    """Deterministic attribute schedule: most-connected first.

    Placing attributes that share constraints consecutively lets the DFS
    fire those constraints early, which is what makes near-unique sets
    cheap.  Depends only on the constraint set, so results stay
    reproducible.  Ties break toward the original attribute order.
    """
    degree = [0] * m
    anchored = [0] * m
    edges = [[0] * m for _ in range(m)]
    for op, a1, _v1, a2, _v2, _house, _neg in compiled:
        degree[a1] += 1
        if op == 0:
            anchored[a1] += 1
        else:
            degree[a2] += 1
            if a1 != a2:
                edges[a1][a2] += 1
                edges[a2][a1] += 1
    order: list[int] = []
    chosen = [False] * m
    for _ in range(m):
        best_key = None
        best_attr = 0
        for a in range(m):
            if chosen[a]:
                continue
            link = sum(edges[a][b] for b in order)
            key = (link + anchored[a], degree[a], -a)
            if best_key is None or key > best_key:
                best_key = key
                best_attr = a
        order.append(best_attr)
        chosen[best_attr] = True
    return order


def _search(constraints, dims: PuzzleDims, cap: int, collect: int):
    """Core DFS.  Returns (count, overflowed, solutions as position arrays)."""
    if cap < 2:
        raise ValueError(f"cap must be >= 2, got {cap}")
    n = dims.n_houses
    m = len(dims.attributes)
    nvars = n * m
    compiled = _compile(constraints, dims)

    # Schedule attributes by connectivity, then index variables by slot.
    order = _attr_order(compiled, m)
    slot_of = [0] * m
    for slot, attr in enumerate(order):
        slot_of[attr] = slot
    compiled = [
        (op, slot_of[a1], v1, slot_of[a2] if op != 0 else 0, v2, house, neg)
        for (op, a1, v1, a2, v2, house, neg) in compiled
    ]

    # A constraint can fire as soon as its last operand is placed.
    triggers: list[list] = [[] for _ in range(nvars)]
    for spec in compiled:
        op, a1, v1, a2, v2, _house, _neg = spec
        t = a1 * n + v1
        if op != 0:
            t = max(t, a2 * n + v2)
        triggers[t].append(spec)

    pos = [0] * nvars  # house of var (slot*n + value), 1-based, 0 = unplaced
    used = [0] * m  # bitmask of occupied houses per slot
    state = [0, False]  # found, overflowed
    solutions: list[list[int]] = []

    def canonical(slot_pos: list[int]) -> list[int]:
        # Undo the slot permutation so callers see attr-major positions.
        canon = [0] * nvars
        for slot, attr in enumerate(order):
            canon[attr * n : attr * n + n] = slot_pos[slot * n : slot * n + n]
        return canon

    def satisfied(spec) -> bool:
        op, a1, v1, a2, v2, house, neg = spec
        h1 = pos[a1 * n + v1]
        if op == 0:
            ok = h1 == house
        else:
            h2 = pos[a2 * n + v2]
            if op == 1:
                ok = h1 == h2
            elif op == 2:
                ok = h1 != h2
            elif op == 3:
                ok = h1 == h2 - 1
            elif op == 4:
                ok = h1 == h2 + 1
            elif op == 5:
                ok = abs(h1 - h2) == 1
            elif op == 6:
                ok = h1 < h2
            elif op == 7:
                ok = h1 > h2
            elif op == 8:
                ok = abs(h1 - h2) == 2
            else:
                ok = abs(h1 - h2) == 3
        return not ok if neg else ok

    def dfs(var: int) -> None:
        if var == nvars:
            state[0] += 1
            if len(solutions) < collect:
                solutions.append(canonical(pos))
            if state[0] >= cap:
                state[1] = True
            return
        slot = var // n
        mask = used[slot]
        mine = triggers[var]
        for house in range(1, n + 1):
            bit = 1 << house
            if mask & bit:
                continue
            pos[var] = house
            if all(satisfied(spec) for spec in mine):
                used[slot] = mask | bit
                dfs(var + 1)
                used[slot] = mask
                if state[1]:
                    pos[var] = 0
                    return
        pos[var] = 0

    dfs(0)
    return state[0], state[1], solutions


def _materialize(pos: list[int], dims: PuzzleDims) -> SolutionGrid:
    n = dims.n_houses
    cells = {}
    for ai, attr in enumerate(dims.attributes):
        for vi, value in enumerate(dims.domains[attr]):
            cells[(pos[ai * n + vi], attr)] = value
    return SolutionGrid(n_houses=n, attributes=dims.attributes, cells=cells)


def count_solutions(constraints, dims: PuzzleDims, cap: int = DEFAULT_CAP) -> CountResult:
    """Count grids satisfying every constraint, up to `cap`.

    Keeps the first two witnesses in enumeration order.
    """
    count, overflowed, sols = _search(constraints, dims, cap, collect=2)
    witnesses = tuple(_materialize(p, dims) for p in sols)
    return CountResult(count=count, cap=cap, overflowed=overflowed, witnesses=witnesses)


def enumerate_solutions(constraints, dims: PuzzleDims, cap: int = DEFAULT_CAP):
    """All satisfying grids in enumeration order, or overflowed=True.

    Returns (grids, overflowed); on overflow the list holds the first
    `cap` grids found.
    """
    count, overflowed, sols = _search(constraints, dims, cap, collect=cap)
    return [_materialize(p, dims) for p in sols], overflowed


def is_unique(constraints, dims: PuzzleDims):
    """(True, the_grid) when exactly one grid satisfies the set."""
    result = count_solutions(constraints, dims, cap=2)
    if result.count == 1 and not result.overflowed:
        return True, result.witnesses[0]
    return False, None


def check_necessity(puzzle: Puzzle) -> dict:
    """For each missing clue: does removing it from the full set break uniqueness?

    True means the clue is necessary (the full set minus that clue admits
    more than one grid), which is what certified instances require.
    """
    full = [clue.constraint for clue in puzzle.full_clues]
    out = {}
    for cid in puzzle.missing_ids:
        rest = [c for c in full if c.id != cid]
        result = count_solutions(rest, puzzle.dims, cap=2)
        out[cid] = result.count > 1 or result.overflowed
    return out
