"""
Reduced words in the free group on {a, b} and their action through partial maps.
"""

from dataclasses import dataclass
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

from src.free_actions.core.partial import PartialAutomorphism
from src.free_actions.core.structures import Element

# letter codes; the inverse of code c is c ^ 1
A, A_INV, B, B_INV = 0, 1, 2, 3
LETTERS = "aAbB"


def inverse_letter(c: int) -> int:
    return c ^ 1


@dataclass(frozen=True, order=True)
class ReducedWord:
    """Freely reduced, non-empty word; letters are codes 0..3 for a, a^-1, b, b^-1."""

    letters: Tuple[int, ...]

    def __post_init__(self):
        if not self.letters:
            raise ValueError("A reduced word has length at least 1")
        for c in self.letters:
            if c not in (A, A_INV, B, B_INV):
                raise ValueError(f"Unknown letter code {c}")
        for c, d in zip(self.letters, self.letters[1:]):
            if d == inverse_letter(c):
                raise ValueError(f"Word {self} is not reduced")

    @classmethod
    def parse(cls, text: str) -> "ReducedWord":
        try:
            return cls(tuple(LETTERS.index(ch) for ch in text))
        except ValueError as e:
            raise ValueError(f"Cannot parse word {text!r}: {e}") from e

    def __len__(self) -> int:
        return len(self.letters)

    def __str__(self) -> str:
        return "".join(LETTERS[c] for c in self.letters)

    def inverse(self) -> "ReducedWord":
        return ReducedWord(tuple(inverse_letter(c) for c in reversed(self.letters)))

    def is_cyclically_reduced(self) -> bool:
        return self.letters[0] != inverse_letter(self.letters[-1])


def word_count(L: int) -> int:
    """Number of reduced words of length 1..L."""
    return sum(4 * 3 ** (l - 1) for l in range(1, L + 1))


def reduced_words(L: int) -> List[ReducedWord]:
    """All reduced words of length 1..L, by length and then letter code."""
    if L < 0:
        raise ValueError(f"Word length bound must be >= 0, got {L}")
    out: List[ReducedWord] = []
    layer: List[Tuple[int, ...]] = [(c,) for c in range(4)]
    for _ in range(L):
        out.extend(ReducedWord(t) for t in layer)
        layer = [t + (c,) for t in layer for c in range(4) if c != inverse_letter(t[-1])]
    return out


Step = Callable[[int, Element], Optional[Element]]


def step_function(phi: PartialAutomorphism, gamma: PartialAutomorphism) -> Step:
    """letter, point -> image of the point under that generator, or None where undefined."""
    moves = (phi.get, phi.preimage, gamma.get, gamma.preimage)
    return lambda c, x: moves[c](x)


def apply_word(
    w: ReducedWord, phi: PartialAutomorphism, gamma: PartialAutomorphism, x: Element
) -> Optional[Element]:
    """w(phi, gamma) applied to x, composing right to left; None once a factor is undefined."""
    step = step_function(phi, gamma)
    for c in reversed(w.letters):
        x = step(c, x)
        if x is None:
            return None
    return x


def walk(step: Step, x: Element, max_len: int, first: Sequence[int] = (A, A_INV, B, B_INV)) -> Iterator[Tuple[Tuple[int, ...], Element]]:
    """Defined reduced walks from x of length 1..max_len.

    Yields (letters in application order, end point); the word acting is the
    reversal of the letters.
    """
    stack: List[Tuple[Tuple[int, ...], Element]] = []
    for c in first:
        y = step(c, x)
        if y is not None:
            stack.append(((c,), y))
    while stack:
        path, y = stack.pop()
        yield path, y
        if len(path) == max_len:
            continue
        back = inverse_letter(path[-1])
        for c in (B_INV, B, A_INV, A):
            if c != back:
                z = step(c, y)
                if z is not None:
                    stack.append((path + (c,), z))


def word_of_walk(path: Sequence[int]) -> ReducedWord:
    return ReducedWord(tuple(reversed(path)))
