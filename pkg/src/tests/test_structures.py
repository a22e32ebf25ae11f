"""
Tests for the structure oracles, qf-types and window growth.
"""

import numpy as np
import pytest

from src.free_actions.core.errors import (
    ArityMismatch,
    ElementNotInStructure,
    InconsistentDemand,
    ResourceLimitExceeded,
)
from src.free_actions.core.partial import PartialAutomorphism
from src.free_actions.core.structures import (
    EQ,
    EquivTowerOracle,
    ExtensionType,
    OracleKind,
    QfType,
    extension_check,
    make_oracle,
    qf_type,
    realize_extension,
    same_orbit,
    window,
)


@pytest.fixture
def dlo():
    oracle = make_oracle(OracleKind.DENSE_LINEAR_ORDER)
    oracle.window(3)
    return oracle


@pytest.fixture
def graph():
    oracle = make_oracle(OracleKind.RANDOM_GRAPH, seed=0)
    oracle.window(2)
    return oracle


def test_parse_oracle_kind():
    assert OracleKind.parse("RandomGraph") is OracleKind.RANDOM_GRAPH
    assert OracleKind.parse("dense_linear_order") is OracleKind.DENSE_LINEAR_ORDER
    assert OracleKind.parse("tower") is OracleKind.EQUIV_TOWER
    with pytest.raises(ValueError):
        OracleKind.parse("hypergraph")


def test_pure_set_window_sizes():
    oracle = make_oracle(OracleKind.PURE_SET)
    for level in range(1, 5):
        assert window(oracle, level).size == 2**level - 1


def test_dlo_window_is_prefix_and_ordered(dlo):
    """window(DLO, 3) has 7 points; ids follow insertion, not the order."""
    s = dlo.window(3)
    assert s.size == 7
    assert dlo.window(2).size == 3
    positions = sorted(dlo.position(x) for x in s)
    assert len(set(positions)) == 7
    for x in s:
        for y in s:
            if x != y:
                assert {dlo.pair_code(x, y), dlo.pair_code(y, x)} == {"<", ">"}


def test_qf_type_columns_and_permutation(dlo):
    s = dlo.current()
    lo, hi = sorted(range(3), key=dlo.position)[:2]
    t = qf_type(s, (lo, hi))
    assert t.codes == ("<",)
    assert t.permuted([1, 0]).codes == (">",)
    triple = qf_type(s, (0, 1, 2))
    assert triple.restrict(2) == qf_type(s, (0, 1))
    assert triple.last_column() == (dlo.pair_code(0, 2), dlo.pair_code(1, 2))
    assert "x0 = x0" not in triple.atoms


def test_foreign_element_is_rejected(dlo):
    with pytest.raises(ElementNotInStructure):
        qf_type(dlo.current(), (0, 10_000))


def test_same_orbit_requires_equal_arity(dlo):
    with pytest.raises(ArityMismatch):
        same_orbit(dlo, (0, 1), (0,))
    a, b = sorted(range(3), key=dlo.position)[:2]
    c, d = sorted(range(3), key=dlo.position)[1:]
    assert same_orbit(dlo, (a, b), (c, d))
    assert not same_orbit(dlo, (a, b), (d, c))


def test_realize_extension_between_points(dlo):
    a, b = sorted(range(dlo.size), key=dlo.position)[2:4]
    z = realize_extension(dlo, (a, b), ExtensionType((a, b), ("<", ">")))
    assert dlo.position(a) < dlo.position(z) < dlo.position(b)


def test_realize_extension_grows_when_window_has_no_witness(dlo):
    size = dlo.size
    a, b = sorted(range(size), key=dlo.position)[2:4]
    between = [x for x in range(size) if dlo.position(a) < dlo.position(x) < dlo.position(b)]
    z = realize_extension(dlo, (a, b), ExtensionType((a, b), ("<", ">")), avoid=between)
    assert z == size
    assert dlo.size == size + 1
    assert dlo.position(a) < dlo.position(z) < dlo.position(b)


def test_realize_extension_from_qf_type(dlo):
    a, b = sorted(range(dlo.size), key=dlo.position)[:2]
    demand = QfType(OracleKind.DENSE_LINEAR_ORDER, 3, ("<", "<", "<"))
    z = realize_extension(dlo, (a, b), demand)
    assert dlo.position(z) > dlo.position(b)


def test_empty_cut_is_inconsistent(dlo):
    a, b = sorted(range(dlo.size), key=dlo.position)[:2]
    with pytest.raises(InconsistentDemand):
        realize_extension(dlo, (a, b), ExtensionType((a, b), (">", "<")))


def test_forced_equality_returns_base_element(graph):
    ext = ExtensionType((0, 1), (EQ, graph.pair_code(1, 0)))
    assert realize_extension(graph, (0, 1), ext) == 0


def test_random_graph_is_closed_under_extension_demands(graph):
    assert extension_check(graph, 2) == []
    assert extension_check(graph, 1, level=1) == []
    with pytest.raises(TypeError):
        extension_check(make_oracle(OracleKind.PURE_SET), 1)


def test_random_graph_witness_realises_demand(graph):
    u, v = 0, 1
    x = graph.add_witness(ExtensionType((u, v), ("E", "N")))
    assert graph.adjacent(u, x) and not graph.adjacent(v, x)
    assert graph.adjacent(x, u)


def test_journal_replay_rebuilds_window(graph):
    graph.add_witness(ExtensionType((0, 1, 2), ("N", "N", "E")))
    copy = make_oracle(OracleKind.RANDOM_GRAPH, seed=0, **graph.params)
    copy.replay(graph.journal())
    assert copy.size == graph.size
    assert copy.level == graph.level
    for x in range(graph.size):
        assert copy.row(x) == graph.row(x)


@pytest.mark.parametrize("kind", list(OracleKind))
def test_journal_replay_keeps_level_boundaries(kind):
    oracle = make_oracle(kind)
    oracle.window(2 if kind is OracleKind.EQUIV_TOWER else 3)
    journal = oracle.journal()
    copy = make_oracle(kind, **oracle.params)
    copy.replay(journal)
    assert copy.journal().level_sizes == journal.level_sizes
    assert copy.level == oracle.level
    assert journal.level_sizes == sorted(journal.level_sizes)
    for level in range(oracle.level + 1):
        assert copy.window(level).size == oracle.window(level).size


def test_directed_witness_demands_are_met_after_growth(graph):
    k = graph.declared_extension_level()
    x = graph.add_witness(ExtensionType((0, 1), ("E", "E")))
    graph.grow()
    assert graph.declared_extension_level() == k
    assert extension_check(graph, k) == []
    assert x < graph.size_at(2)


def test_fork_is_independent(graph):
    scratch = graph.fork()
    scratch.grow()
    assert scratch.size > graph.size
    assert graph.level == 2


def test_window_size_limit():
    oracle = make_oracle(OracleKind.PURE_SET, max_window=5)
    with pytest.raises(ResourceLimitExceeded):
        oracle.window(3)


def test_tower_copies_and_pair_codes():
    tower = EquivTowerOracle()
    assert tower.window(1).size == 3
    tower.window(2)
    x = tower.element_of((1,), 0)
    y = tower.element_of((1,), 1)
    z = tower.element_of((2, 3), 0)
    assert tower.pair_code(x, y) == ()
    assert tower.pair_code(x, y) != EQ
    assert tower.pair_code(x, z) == (1, 2)
    assert tower.coordinate(z, 2) == 3
    assert tower.coordinate(z, 5) == 0
    with pytest.raises(ElementNotInStructure):
        tower.element_of((9, 9, 9))


def test_window_export_lists_relations(dlo):
    lines = dlo.window(2).export_lines()
    assert lines[0].startswith("window DenseLinearOrder")
    assert sum(line.startswith("element ") for line in lines) == 3
    assert sum(line.startswith("relation lt ") for line in lines) == 3


def test_window_level_limit():
    oracle = make_oracle(OracleKind.DENSE_LINEAR_ORDER, max_level=2)
    assert oracle.window(2).size == 3
    with pytest.raises(ResourceLimitExceeded):
        oracle.window(3)
    assert oracle.level == 2


@pytest.mark.parametrize("kind", list(OracleKind))
def test_equal_types_give_partial_automorphisms(kind):
    oracle = make_oracle(kind, seed=1)
    s = oracle.window(2 if kind is OracleKind.EQUIV_TOWER else 3)
    rng = np.random.default_rng(5)
    by_type = {}
    for _ in range(300):
        n = int(rng.integers(1, 4))
        t = tuple(int(x) for x in rng.choice(s.size, size=n, replace=False))
        by_type.setdefault(qf_type(s, t), []).append(t)
    checked = 0
    for first, *others in by_type.values():
        x = next(y for y in range(s.size) if y not in first)
        for t in others[:5]:
            f = PartialAutomorphism(dict(zip(first, t)))
            assert f.is_type_preserving(oracle)
            # and the map extends to one more point
            z = realize_extension(oracle, t, oracle.extension_type(first, x))
            assert f.extended({x: z}).is_type_preserving(oracle)
            checked += 1
    assert checked > 0
