import random

import pytest
from hypothesis import given

from dagexch.dag import (
    Dag,
    DagError,
    brute_force_closed_sets,
    chain,
    edgeless,
    fixture_names,
    load_dag,
    load_fixture,
    parse_dag,
    random_dag,
)

from conftest import dags


def test_parse_single_vertex():
    d = parse_dag("v a")
    assert d.vertices == ("a",) and not d.edges


def test_parse_chain_and_matrix_sequence(matrix_seq):
    d = parse_dag("v v1\nv v2\ne v1 v2")
    assert d.edges == {("v1", "v2")}
    assert parse_dag("v s\nv r\nv c\ne s r\ne s c") == matrix_seq


def test_parse_comments_and_blank_lines():
    d = parse_dag("# header\n\nv a\n  # indented comment\nv b\ne a b\n")
    assert d.vertices == ("a", "b")


@pytest.mark.parametrize(
    "text, line, fragment",
    [
        ("v a\nv b\ne a b\ne b a", 4, "cycle"),
        ("v a\ne a a", 2, "cycle"),
        ("v a\ne a b", 2, "unknown vertex"),
        ("v a\nv b\nv a", 3, "duplicate vertex"),
        ("v a\nv b\ne a b\ne a b", 4, "duplicate edge"),
        ("v a-b", 1, "invalid vertex name"),
        ("v a\nx a", 2, "unrecognised"),
        ("v a\nv b\nv c\ne a b\ne b c\ne c a", 6, "cycle"),
    ],
)
def test_parse_errors_carry_line(text, line, fragment):
    with pytest.raises(DagError) as ei:
        parse_dag(text)
    assert ei.value.line == line
    assert fragment in str(ei.value)
    assert str(ei.value).startswith(f"line {line}:")


def test_constructor_rejects_cycles():
    with pytest.raises(DagError):
        Dag(["a", "b"], [("a", "b"), ("b", "a")])


def test_closed_sets_examples(matrix_seq, chain2):
    assert Dag(["v"]).closed_sets == (frozenset(), frozenset({"v"}))
    assert chain2.closed_sets == (frozenset(), {"v1"}, {"v1", "v2"})
    assert matrix_seq.closed_sets == (frozenset(), {"s"}, {"s", "r"}, {"s", "c"}, {"s", "r", "c"})


def test_downset_closure_interior(matrix_seq):
    c4 = chain(4)
    assert c4.downset("v3") == {"v1", "v2", "v3"}
    assert matrix_seq.downset("r") == {"s", "r"}
    assert edgeless(["x", "y"]).downset("x") == {"x"}
    assert c4.closure({"v3"}) == {"v1", "v2", "v3"}
    assert c4.closure(()) == frozenset()
    assert matrix_seq.closure({"r", "c"}) == {"s", "r", "c"}
    assert c4.interior({"v1", "v3"}) == {"v1"}
    assert c4.interior({"v2", "v3", "v4"}) == frozenset()
    assert matrix_seq.interior({"s", "r"}) == {"s", "r"}


def test_unknown_vertex_errors(matrix_seq):
    for fn in (matrix_seq.downset, matrix_seq.ancestors):
        with pytest.raises(DagError):
            fn("zz")
    with pytest.raises(DagError):
        matrix_seq.closure({"zz"})
    with pytest.raises(DagError):
        matrix_seq.interior({"zz"})


def test_terminal_vertices(matrix_seq, chain2):
    assert chain2.terminal_vertices() == {"v2"}
    assert matrix_seq.terminal_vertices() == {"r", "c"}
    assert edgeless(["x", "y", "z"]).terminal_vertices() == {"x", "y", "z"}


def test_topological_enumeration(matrix_seq):
    assert matrix_seq.topological_enumeration() == ("s", "c", "r")
    assert chain(3).topological_enumeration() == ("v1", "v2", "v3")
    assert edgeless(["b", "a"]).topological_enumeration() == ("a", "b")


def test_antichains_examples(matrix_seq, chain2, rc):
    assert chain2.antichains() == (frozenset(), {"v1"}, {"v2"})
    assert rc.antichains() == (frozenset(), {"r"}, {"c"}, {"r", "c"})
    assert len(matrix_seq.antichains()) == 5


def test_lattice_cap():
    d = edgeless([f"x{i}" for i in range(6)])
    d.lattice_cap = 5
    with pytest.raises(DagError):
        d.closed_sets
    big = Dag([f"x{i}" for i in range(21)])
    with pytest.raises(DagError):
        big.closed_sets


def test_fixtures_load():
    names = fixture_names()
    assert "matrix_sequence" in names and "block_matrix" in names and "walls" in names
    assert len(names) >= 10
    for n in names:
        assert load_fixture(n).closed_sets
    assert load_dag("matrix_sequence").order == ("s", "c", "r")


def test_load_dag_file(tmp_path):
    p = tmp_path / "g.dag"
    p.write_text("v a\nv b\ne a b\n")
    assert load_dag(str(p)).edges == {("a", "b")}
    with pytest.raises(DagError):
        load_dag(str(tmp_path / "missing.dag"))


def test_hundred_random_dags_match_brute_force():
    rng = random.Random(11)
    for _ in range(100):
        d = random_dag(rng.randint(1, 6), rng.random(), rng)
        assert set(d.closed_sets) == set(brute_force_closed_sets(d))
        assert len(d.closed_sets) == len(brute_force_closed_sets(d))


@given(dags())
def test_closed_sets_brute_force(d):
    assert sorted(d.closed_sets, key=d.set_key) == sorted(brute_force_closed_sets(d), key=d.set_key)


@given(dags())
def test_antichain_closure_bijection(d):
    chains = d.antichains()
    images = [d.closure(a) for a in chains]
    assert len(set(images)) == len(chains) == len(d.closed_sets)
    assert set(images) == set(d.closed_sets)
    for a, c in zip(chains, images):
        assert d.maximal(c) == a


@given(dags())
def test_antichains_are_antichains(d):
    for a in d.antichains():
        assert not any(d.comparable(x, y) for x in a for y in a if x != y)


@given(dags())
def test_interior_closure_laws(d):
    rng = random.Random(len(d.vertices))
    for _ in range(10):
        h = frozenset(v for v in d.vertices if rng.random() < 0.5)
        inner, outer = d.interior(h), d.closure(h)
        assert inner <= h <= outer
        assert d.is_closed(inner) and d.is_closed(outer)
        assert d.interior(inner) == inner and d.closure(outer) == outer
        assert inner == frozenset().union(*[c for c in d.closed_sets if c <= h])
        assert inner == {v for v in h if d.downset(v) <= h}
        h2 = h | {v for v in d.vertices if rng.random() < 0.3}
        assert outer <= d.closure(h2)


@given(dags())
def test_topological_prefixes_closed(d):
    order = d.topological_enumeration()
    closed = set(d.closed_sets)
    for i in range(len(order) + 1):
        assert frozenset(order[:i]) in closed


@given(dags())
def test_serialize_round_trip(d):
    again = parse_dag(d.serialize())
    assert again == d
    assert again.serialize() == d.serialize()
    assert again.order == d.order


@given(dags())
def test_downsets_closed_and_contain_vertex(d):
    for v in d.vertices:
        assert v in d.downset(v) and d.is_closed(d.downset(v))
        assert d.ancestors(v) == d.downset(v) - {v}
