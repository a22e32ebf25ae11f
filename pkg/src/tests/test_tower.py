import pytest

from src.free_actions.core.closure import certify_empty_closure
from src.free_actions.core.partial import PartialAutomorphism
from src.free_actions.core.structures import EquivTowerOracle, OracleKind, make_oracle
from src.free_actions.core.tower import (
    ImaginaryClass,
    fixed_classes_over_domain,
    home_sort_control,
    imaginary_class,
    tower_fixed_class,
    tower_neumann_failure_demo,
)


@pytest.fixture
def tower():
    oracle = EquivTowerOracle(depth=2)
    oracle.window(3)
    certify_empty_closure(oracle)
    return oracle


def test_fixed_class_is_least_agreeing_relation(tower):
    x = tower.element_of((1, 2), 0)
    y = tower.element_of((3, 2), 0)
    fixed = tower_fixed_class(tower, PartialAutomorphism({x: y}), x)
    assert fixed.index == 2
    assert fixed == imaginary_class(tower, y, 2)


def test_copies_fix_the_first_class(tower):
    x = tower.element_of((1, 2), 0)
    y = tower.element_of((1, 2), 1)
    assert tower_fixed_class(tower, PartialAutomorphism({x: y}), x).index == 1


def test_imaginary_class_index_starts_at_one(tower):
    with pytest.raises(ValueError):
        imaginary_class(tower, 0, 0)
    assert imaginary_class(tower, 0, 1) == ImaginaryClass(1, 0, 5)


def test_fixed_classes_over_a_domain(tower):
    f = PartialAutomorphism({tower.element_of((1,), 0): tower.element_of((2, 1), 0)})
    (fixed,) = fixed_classes_over_domain(tower, f)
    assert fixed.index == 3


def test_demo_fails_to_separate_at_depth_two(tower):
    report = tower_neumann_failure_demo(tower, 0, budget=10_000)
    assert report.exhaustive
    assert not report.separated
    assert report.depth == 2
    assert report.max_fixed_index <= 3
    assert sum(report.fixed_index_counts.values()) == tower.size


def test_demo_needs_a_tower():
    with pytest.raises(TypeError):
        tower_neumann_failure_demo(make_oracle(OracleKind.PURE_SET), 0, budget=10)


def test_home_sorts_still_separate(tower):
    assert home_sort_control(tower, 0)["separated"]
    graph = make_oracle(OracleKind.RANDOM_GRAPH)
    graph.window(2)
    certify_empty_closure(graph)
    control = home_sort_control(graph, 0)
    assert control["separated"]
    assert control["image"] != 0
