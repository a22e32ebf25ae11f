import pytest

from src.free_actions.core.partial import PartialAutomorphism
from src.free_actions.core.words import (
    A,
    B,
    ReducedWord,
    apply_word,
    reduced_words,
    step_function,
    walk,
    word_count,
    word_of_walk,
)


def test_word_counts():
    assert word_count(1) == 4
    assert word_count(3) == 4 + 12 + 36
    words = reduced_words(3)
    assert len(words) == word_count(3)
    assert len(set(words)) == len(words)
    assert reduced_words(0) == []


def test_parse_and_render():
    w = ReducedWord.parse("aBBa")
    assert str(w) == "aBBa"
    assert len(w) == 4
    assert str(w.inverse()) == "AbbA"


def test_unreduced_words_are_rejected():
    with pytest.raises(ValueError):
        ReducedWord.parse("aA")
    with pytest.raises(ValueError):
        ReducedWord(())
    with pytest.raises(ValueError):
        ReducedWord.parse("ax")


def test_cyclic_reduction():
    assert ReducedWord.parse("ab").is_cyclically_reduced()
    assert not ReducedWord.parse("abA").is_cyclically_reduced()


def test_apply_word_composes_right_to_left():
    phi = PartialAutomorphism({0: 1})
    gamma = PartialAutomorphism({1: 2})
    assert apply_word(ReducedWord.parse("ba"), phi, gamma, 0) == 2
    assert apply_word(ReducedWord.parse("ab"), phi, gamma, 0) is None
    assert apply_word(ReducedWord.parse("AB"), phi, gamma, 2) == 0


def test_walks_follow_defined_moves():
    phi = PartialAutomorphism({0: 1, 1: 2})
    gamma = PartialAutomorphism({2: 3})
    step = step_function(phi, gamma)
    ends = {str(word_of_walk(path)): y for path, y in walk(step, 0, 3)}
    assert ends == {"a": 1, "aa": 2, "baa": 3}
    only_b = list(walk(step, 0, 3, first=(B,)))
    assert only_b == []
    from_two = {str(word_of_walk(path)) for path, _ in walk(step, 2, 2, first=(A,))}
    assert from_two == set()
