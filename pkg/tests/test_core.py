import json

import pytest

from zebrasim.core import (
    Constraint,
    Entity,
    InvalidToken,
    Kind,
    Query,
    SolutionGrid,
    UnknownEntity,
    canonicalize_token,
    house_from_wire,
    house_to_wire,
    query_for_constraint,
    validate_puzzle,
)

from conftest import TINY_DIMS


def test_canonicalize_token_folds_case_and_whitespace():
    assert canonicalize_token("  Red\tWine ") == "red wine"
    assert canonicalize_token("BLUE") == "blue"
    with pytest.raises(InvalidToken):
        canonicalize_token("   ")


def test_house_wire_round_trip():
    assert house_to_wire(3) == "house3"
    assert house_from_wire("house3", 5) == 3
    # case folding is the caller's job; the wire form itself is strict
    assert house_from_wire("House2", 5) is None
    assert house_from_wire("house0", 5) is None
    assert house_from_wire("house6", 5) is None
    assert house_from_wire("housefive", 5) is None
    assert house_from_wire("garage1", 5) is None


def test_entity_canonicalizes_fields():
    entity = Entity(attr=" Color ", value=" Deep  Blue ")
    assert entity.attr == "color"
    assert entity.value == "deep blue"


def test_constraint_shape_validation():
    lhs = Entity(attr="color", value="red")
    rhs = Entity(attr="name", value="alice")
    Constraint(id="c1", kind=Kind.FOUND_AT, lhs=lhs, house=2)
    Constraint(id="c2", kind=Kind.LEFT_OF, lhs=lhs, rhs=rhs)
    with pytest.raises(ValueError):
        Constraint(id="c3", kind=Kind.FOUND_AT, lhs=lhs, rhs=rhs)
    with pytest.raises(ValueError):
        Constraint(id="c4", kind=Kind.FOUND_AT, lhs=lhs)
    with pytest.raises(ValueError):
        Constraint(id="c5", kind=Kind.LEFT_OF, lhs=lhs, house=1)
    with pytest.raises(ValueError):
        Constraint(id="c6", kind=Kind.SAME_HOUSE, lhs=lhs)


def test_constraint_negation_flips_polarity_only():
    lhs = Entity(attr="color", value="red")
    rhs = Entity(attr="name", value="alice")
    c = Constraint(id="c1", kind=Kind.SIDE_BY_SIDE, lhs=lhs, rhs=rhs)
    n = c.negated()
    assert n.polarity == "negated"
    assert n.negated().polarity == "asserted"
    assert n.kind is c.kind and n.lhs == c.lhs and n.rhs == c.rhs


def test_symmetric_signature_ignores_operand_order():
    a = Entity(attr="color", value="red")
    b = Entity(attr="name", value="alice")
    for kind in (Kind.SAME_HOUSE, Kind.NOT_AT, Kind.SIDE_BY_SIDE, Kind.ONE_BETWEEN, Kind.TWO_BETWEEN):
        c1 = Constraint(id="x", kind=kind, lhs=a, rhs=b)
        c2 = Constraint(id="y", kind=kind, lhs=b, rhs=a)
        assert c1.signature() == c2.signature()
    c1 = Constraint(id="x", kind=Kind.LEFT_OF, lhs=a, rhs=b)
    c2 = Constraint(id="y", kind=Kind.LEFT_OF, lhs=b, rhs=a)
    assert c1.signature() != c2.signature()


def test_constraint_record_round_trip():
    lhs = Entity(attr="color", value="red")
    rhs = Entity(attr="name", value="alice")
    for c in (
        Constraint(id="c1", kind=Kind.FOUND_AT, lhs=lhs, house=2),
        Constraint(id="c2", kind=Kind.DIRECT_LEFT, lhs=lhs, rhs=rhs, polarity="negated"),
    ):
        rec = c.to_record()
        back = Constraint.from_record(rec, n_houses=3)
        assert back == c
    rec = Constraint(id="c1", kind=Kind.FOUND_AT, lhs=lhs, house=2).to_record()
    assert rec["parsed"]["house"] == "house2"
    assert rec["type"] == "fact"


def test_query_serialize_is_canonical_and_stable():
    q1 = Query(qtype="relation", rel="same_house", lhs=Entity(attr="color", value="red"), rhs=Entity(attr="name", value="alice"))
    blob = q1.serialize()
    assert json.loads(blob) == q1.to_record()
    assert blob == q1.serialize()
    assert list(json.loads(blob)) == sorted(json.loads(blob))


def test_query_for_constraint_round_trip():
    lhs = Entity(attr="color", value="red")
    c = Constraint(id="c1", kind=Kind.FOUND_AT, lhs=lhs, house=1)
    q = query_for_constraint(c)
    assert q.qtype == "fact"
    assert q.to_constraint().signature() == c.signature()
    rel = Constraint(id="c2", kind=Kind.LEFT_OF, lhs=lhs, rhs=Entity(attr="name", value="alice"))
    q2 = query_for_constraint(rel)
    assert q2.qtype == "relation" and q2.rel == "left_of"
    assert q2.to_constraint().signature() == rel.signature()


def test_solution_grid_lookup_and_validate():
    cells = {
        (1, "name"): "alice", (2, "name"): "bob", (3, "name"): "carol",
        (1, "color"): "red", (2, "color"): "blue", (3, "color"): "white",
    }
    grid = SolutionGrid(n_houses=3, attributes=("name", "color"), cells=cells)
    assert grid.value_at(2, "color") == "blue"
    assert grid.house_of("color", "white") == 3
    with pytest.raises(UnknownEntity):
        grid.house_of("color", "green")
    assert grid.validate() == []
    assert grid.row(1) == ["1", "alice", "red"]

    bad = SolutionGrid(n_houses=3, attributes=("name", "color"),
                       cells={**cells, (3, "color"): "red"})
    assert bad.validate() != []


def test_solution_grid_record_round_trip():
    cells = {
        (1, "name"): "alice", (2, "name"): "bob", (3, "name"): "carol",
        (1, "color"): "red", (2, "color"): "blue", (3, "color"): "white",
    }
    grid = SolutionGrid(n_houses=3, attributes=("name", "color"), cells=cells)
    rec = grid.to_record()
    assert rec["header"] == ["House", "name", "color"]
    assert SolutionGrid.from_record(rec) == grid


def test_validate_puzzle_accepts_generated(small_puzzle):
    assert validate_puzzle(small_puzzle) == []


def test_validate_puzzle_flags_bad_partition(small_puzzle):
    import dataclasses
    broken = dataclasses.replace(small_puzzle, visible_ids=small_puzzle.visible_ids + small_puzzle.missing_ids[:1])
    codes = {v.code for v in validate_puzzle(broken)}
    assert "OverlapViolation" in codes


def test_dims_header():
    assert TINY_DIMS.header() == ["House", "name", "color"]
