"""
Tests for separation of finite sets (with and without a fixed base).
"""

import numpy as np
import pytest

from src.free_actions.core.closure import certify_empty_closure, certify_oracle
from src.free_actions.core.errors import SearchBudgetExhausted, UncertifiedInput
from src.free_actions.core.neumann import separate, separate_over
from src.free_actions.core.structures import OracleKind, make_oracle, qf_type


def certified(kind, level):
    oracle = make_oracle(kind)
    oracle.window(level)
    certify_empty_closure(oracle)
    certify_oracle(oracle)
    return oracle


@pytest.fixture(params=[OracleKind.PURE_SET, OracleKind.DENSE_LINEAR_ORDER, OracleKind.RANDOM_GRAPH])
def oracle(request):
    return certified(request.param, 3)


def test_separation_needs_certified_empty_closure():
    oracle = make_oracle(OracleKind.PURE_SET)
    oracle.window(2)
    with pytest.raises(UncertifiedInput):
        separate(oracle, {0}, {0})


def test_separate_moves_set_off_itself(oracle):
    A = {0, 1, 2}
    witness = separate(oracle, A, A)
    sources = sorted(A)
    images = [witness.mover(x) for x in sources]
    assert not set(images) & A
    s = oracle.current()
    assert qf_type(s, sources) == qf_type(s, images)
    assert witness.verify(oracle)


def test_separate_empty_set_is_identity(oracle):
    witness = separate(oracle, set(), {0, 1})
    assert len(witness.mover) == 0
    assert witness.verify(oracle)


def random_set(rng, size, low, high):
    k = int(rng.integers(low, high + 1))
    return {int(x) for x in rng.choice(size, size=k, replace=False)}


@pytest.fixture(scope="module", params=list(OracleKind), ids=lambda kind: kind.value)
def any_oracle(request):
    return certified(request.param, 2 if request.param is OracleKind.EQUIV_TOWER else 3)


def test_random_inputs_give_sound_witnesses(any_oracle):
    oracle = any_oracle
    rng = np.random.default_rng(7)
    for _ in range(100):
        size = oracle.size
        A = random_set(rng, size, 1, 3)
        B = random_set(rng, size, 0, 4)
        witness = separate(oracle, A, B)
        assert not {witness.mover(x) for x in A} & B
        s = oracle.current()
        assert qf_type(s, sorted(A)) == qf_type(s, [witness.mover(x) for x in sorted(A)])
        assert witness.verify(oracle)


def test_random_relative_inputs_give_sound_witnesses(any_oracle):
    oracle = any_oracle
    rng = np.random.default_rng(11)
    for _ in range(100):
        size = oracle.size
        C = random_set(rng, size, 1, 4)
        B = {x for x in C if rng.random() < 0.5}
        A = random_set(rng, size, 0, 5) | B
        witness = separate_over(oracle, A, B, C)
        assert all(witness.mover(b) == b for b in B)
        assert {witness.mover(c) for c in C} & A == B
        assert witness.verify(oracle)


def test_tower_separation():
    tower = certified(OracleKind.EQUIV_TOWER, 2)
    A = {0, 1, 2}
    witness = separate(tower, A, A)
    assert not {witness.mover(x) for x in A} & A
    assert witness.verify(tower)
    relative = separate_over(tower, set(range(6)), {0}, {0, 3, 4})
    assert relative.mover(0) == 0
    assert not {relative.mover(c) for c in (3, 4)} & set(range(6))
    assert relative.verify(tower)


def test_no_growth_allowed_exhausts_the_budget():
    oracle = certified(OracleKind.DENSE_LINEAR_ORDER, 2)
    everything = set(range(oracle.size))
    with pytest.raises(SearchBudgetExhausted):
        separate(oracle, {0}, everything, max_growths=0)


def test_directed_growth_adds_a_fresh_witness():
    oracle = certified(OracleKind.DENSE_LINEAR_ORDER, 2)
    size = oracle.size
    everything = set(range(size))
    witness = separate(oracle, {0}, everything)
    assert witness.growths == 1
    assert witness.mover(0) >= size
    assert oracle.size == size + 1


def test_separate_over_fixes_base_and_avoids(oracle):
    A = set(range(6))
    B = {0, 1}
    C = {0, 1, 2, 3}
    witness = separate_over(oracle, A, B, C)
    assert all(witness.mover(b) == b for b in B)
    moved = {witness.mover(c) for c in C - B}
    assert not moved & A
    assert witness.verify(oracle)


def test_separate_over_requires_base_inside_moved_set(oracle):
    with pytest.raises(ValueError):
        separate_over(oracle, {0, 1}, {5}, {0, 1})


def test_separate_over_requires_closure_certificates():
    oracle = make_oracle(OracleKind.PURE_SET)
    oracle.window(3)
    certify_empty_closure(oracle)
    with pytest.raises(UncertifiedInput):
        separate_over(oracle, {0, 1}, {0}, {0, 2})
