import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from zebrasim.core import Constraint, Entity, Kind, PuzzleDims, SolutionGrid
from zebrasim.generator import GeneratorConfig, generate_puzzle


TINY_DIMS = PuzzleDims(
    n_houses=3,
    attributes=("name", "color"),
    domains={"name": ("alice", "bob", "carol"), "color": ("red", "blue", "white")},
)


def make_dims(n_houses: int, n_attrs: int) -> PuzzleDims:
    """Synthetic dims with distinct values: a0_v1, a0_v2, ..."""
    attributes = tuple(f"a{i}" for i in range(n_attrs))
    domains = {a: tuple(f"{a} v{j}" for j in range(1, n_houses + 1)) for a in attributes}
    return PuzzleDims(n_houses=n_houses, attributes=attributes, domains=domains)


def random_grid(dims: PuzzleDims, rng: random.Random) -> SolutionGrid:
    cells = {}
    for attr in dims.attributes:
        values = list(dims.domains[attr])
        rng.shuffle(values)
        for h in range(1, dims.n_houses + 1):
            cells[(h, attr)] = values[h - 1]
    return SolutionGrid(n_houses=dims.n_houses, attributes=dims.attributes, cells=cells)


def random_constraint(dims: PuzzleDims, rng: random.Random, cid: str = "c") -> Constraint:
    """Uniformly random syntactically valid constraint (truth not guaranteed)."""
    kind = rng.choice(list(Kind))
    def pick_entity(exclude_attr=None):
        attrs = [a for a in dims.attributes if a != exclude_attr]
        attr = rng.choice(attrs)
        return Entity(attr=attr, value=rng.choice(list(dims.domains[attr])))
    lhs = pick_entity()
    polarity = rng.choice(("asserted", "negated"))
    if kind is Kind.FOUND_AT:
        return Constraint(id=cid, kind=kind, lhs=lhs, house=rng.randrange(1, dims.n_houses + 1), polarity=polarity)
    if kind in (Kind.SAME_HOUSE, Kind.NOT_AT):
        rhs = pick_entity(exclude_attr=lhs.attr)
    else:
        rhs = pick_entity()
        while rhs.key() == lhs.key():
            rhs = pick_entity()
    return Constraint(id=cid, kind=kind, lhs=lhs, rhs=rhs, polarity=polarity)


@pytest.fixture(scope="session")
def small_puzzle():
    return generate_puzzle(GeneratorConfig(seed=101, size="small", n_missing=1), puzzle_id="fix-small")


@pytest.fixture(scope="session")
def medium_puzzle():
    return generate_puzzle(GeneratorConfig(seed=202, size="medium", n_missing=2), puzzle_id="fix-medium")
