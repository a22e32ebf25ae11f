"""
Tests for the back-and-forth construction and its certification.
"""

import networkx as nx
import pytest

from src.free_actions.core.closure import certify_empty_closure, certify_oracle
from src.free_actions.core.errors import InvariantViolation, NotFreeError
from src.free_actions.core.freepair import (
    Direction,
    FixedPointReport,
    FreePair,
    FreePairBuilder,
    Side,
    StepRecord,
    ball_size,
    build,
    certified_pair,
    certify_tree_ball,
    check_fixed_points,
    extend_step,
    init_builder,
    run_schedule,
    schreier_ball,
    tree_ball_problems,
)
from src.free_actions.core.partial import PartialAutomorphism
from src.free_actions.core.structures import OracleKind, make_oracle


@pytest.fixture
def builder():
    oracle = make_oracle(OracleKind.RANDOM_GRAPH, seed=0)
    builder = init_builder(oracle, level=2, cert_depth=6)
    run_schedule(builder, 3)
    return builder


def test_initial_pair_uses_four_distinct_points():
    oracle = make_oracle(OracleKind.DENSE_LINEAR_ORDER)
    builder = init_builder(oracle, level=3)
    (a0, b0), = builder.phi.items()
    (a1, b1), = builder.gamma.items()
    assert a0 == 0
    assert len({a0, b0, a1, b1}) == 4
    assert "acl_empty" in oracle.certificates


def test_schedule_grows_both_maps(builder):
    assert len(builder.steps) == 12
    assert len(builder.phi) > 1 and len(builder.gamma) > 1
    for side in (Side.PHI, Side.GAMMA):
        assert builder.map_for(side).is_type_preserving(builder.oracle)


def test_every_step_keeps_the_freshness_ledger(builder):
    for step in builder.steps:
        assert step.ledger_holds()
        assert set(step.B) <= set(step.D)


def test_full_check_finds_no_fixed_points(builder):
    pair = certified_pair(builder)
    assert pair.report.passed
    assert pair.report.evaluations > 0
    assert pair.report.elements == builder.oracle.size


def test_fixed_point_check_is_worker_independent(builder):
    pair = builder.pair()
    one = check_fixed_points(pair, 5, workers=1)
    three = check_fixed_points(pair, 5, workers=3)
    assert one.evaluations == three.evaluations
    assert one.violations == three.violations


def test_fixed_points_are_reported():
    oracle = make_oracle(OracleKind.PURE_SET)
    oracle.window(2)
    pair = FreePair(oracle, PartialAutomorphism({0: 1, 1: 0}), PartialAutomorphism())
    report = check_fixed_points(pair, 2)
    assert not report.passed
    assert ("aa", 0) in report.violations
    assert ("AA", 1) in report.violations


def test_merging_reports_of_different_lengths_fails():
    with pytest.raises(ValueError):
        FixedPointReport(3).merge(FixedPointReport(4))


def test_extend_step_needs_a_superset_target(builder):
    with pytest.raises(ValueError):
        extend_step(builder, Side.PHI, Direction.DOMAIN, [0])


def test_extend_step_is_a_no_op_on_the_current_domain(builder):
    steps = len(builder.steps)
    extend_step(builder, "phi", "domain", builder.phi.domain)
    assert len(builder.steps) == steps


def test_extend_rational_map_to_a_point_above():
    """phi = {0 -> 1} on Q, with 0 at 0, 1 at -1 and 2 at 1, extended to {0, 2}."""
    oracle = make_oracle(OracleKind.DENSE_LINEAR_ORDER)
    oracle.window(3)
    certify_empty_closure(oracle)
    certify_oracle(oracle)
    assert [oracle.position(x) for x in (0, 1, 2)] == [0, -1, 1]
    builder = FreePairBuilder(oracle, PartialAutomorphism({0: 1}), PartialAutomorphism({5: 6}), cert_depth=6)

    extend_step(builder, Side.PHI, Direction.DOMAIN, {0, 2})
    phi = builder.phi
    assert phi.domain == {0, 2}
    assert phi(0) == 1
    assert oracle.position(phi(2)) > oracle.position(1)
    assert phi(2) not in {0, 1, 2, 5, 6}
    [step] = builder.steps
    assert (step.C, step.B, step.A2, step.B2) == ((0, 2), (1,), (5,), (6,))
    assert step.D == tuple(sorted({1, phi(2)}))
    assert step.ledger_holds()
    assert builder.gamma == PartialAutomorphism({5: 6})


def test_broken_ledger_is_detected():
    record = StepRecord(0, Side.PHI, Direction.DOMAIN, C=(0, 1), B=(2,), A2=(), B2=(), D=(1, 2), level=1)
    assert not record.ledger_holds()
    with pytest.raises(InvariantViolation):
        record.check()


@pytest.mark.parametrize("kind", [OracleKind.PURE_SET, OracleKind.DENSE_LINEAR_ORDER])
def test_build_small_pairs(kind):
    pair = build(make_oracle(kind), rounds=2, L_cert=6, level=3)
    assert pair.report.passed
    assert len(pair.steps) == 8


def test_schreier_ball_is_a_tree_ball(builder):
    graph = schreier_ball(builder, 0, 3)
    assert graph.number_of_nodes() == ball_size(3) == 53
    assert tree_ball_problems(graph, 3) == []
    # the completed ball is stored in the pair itself
    again = schreier_ball(builder.pair(), 0, 3, extend=False)
    assert set(again.nodes) == set(graph.nodes)
    labels = {d["label"] for _, _, d in graph.edges(data=True)}
    assert labels == {"a", "b"}


def test_cycles_are_not_tree_balls():
    graph = nx.MultiGraph()
    nx.add_cycle(graph, range(5))
    for x in graph.nodes:
        graph.nodes[x]["depth"] = 1
    assert tree_ball_problems(graph, 1)
    with pytest.raises(NotFreeError):
        certify_tree_ball(graph, 1)
