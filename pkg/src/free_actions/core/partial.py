"""
Finite partial automorphisms of a homogeneous window.
"""

from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Tuple

from src.free_actions.core.errors import InvariantViolation
from src.free_actions.core.structures import Element, StructureOracle


class PartialAutomorphism:
    """A finite bijection domain -> image between subsets of a window.

    It is a partial automorphism when it preserves every pair code; since all
    oracle signatures are binary, that is the same as preserving the qf-type of
    every tuple from the domain, and by homogeneity the map then extends to an
    automorphism of the limit.
    """

    __slots__ = ("_forward", "_backward", "level")

    def __init__(self, mapping: Optional[Mapping[Element, Element]] = None, level: int = 0):
        self._forward: Dict[Element, Element] = dict(mapping or {})
        self._backward: Dict[Element, Element] = {v: k for k, v in self._forward.items()}
        self.level = level
        if len(self._backward) != len(self._forward):
            raise InvariantViolation("Partial automorphism mapping is not injective")

    @property
    def domain(self) -> FrozenSet[Element]:
        return frozenset(self._forward)

    @property
    def image(self) -> FrozenSet[Element]:
        return frozenset(self._backward)

    def get(self, x: Element) -> Optional[Element]:
        return self._forward.get(x)

    def preimage(self, y: Element) -> Optional[Element]:
        return self._backward.get(y)

    def __call__(self, x: Element) -> Element:
        return self._forward[x]

    def __contains__(self, x: Element) -> bool:
        return x in self._forward

    def __len__(self) -> int:
        return len(self._forward)

    def __iter__(self) -> Iterator[Element]:
        return iter(sorted(self._forward))

    def __eq__(self, other) -> bool:
        return isinstance(other, PartialAutomorphism) and self._forward == other._forward

    def __hash__(self):
        return hash(frozenset(self._forward.items()))

    def __repr__(self) -> str:
        body = ", ".join(f"{k}->{v}" for k, v in self.items())
        return f"PartialAutomorphism({{{body}}})"

    def items(self) -> List[Tuple[Element, Element]]:
        return sorted(self._forward.items())

    def inverse(self) -> "PartialAutomorphism":
        return PartialAutomorphism(self._backward, self.level)

    def extended(self, pairs: Mapping[Element, Element], level: Optional[int] = None) -> "PartialAutomorphism":
        merged = dict(self._forward)
        for x, y in pairs.items():
            if merged.get(x, y) != y:
                raise InvariantViolation(f"Extension remaps {x} from {merged[x]} to {y}")
            merged[x] = y
        return PartialAutomorphism(merged, self.level if level is None else level)

    def fixes_pointwise(self, elements: Iterable[Element]) -> bool:
        return all(self._forward.get(x) == x for x in elements)

    def type_violations(
        self,
        oracle: StructureOracle,
        limit: Optional[int] = None,
        focus: Optional[Iterable[Element]] = None,
    ) -> List[Tuple[Element, Element]]:
        """Domain pairs (x, y) whose pair code is not preserved.

        With `focus`, only pairs with at least one entry in focus are checked
        (the rest are known to be preserved).
        """
        bad = []
        items = self.items()
        if focus is None:
            pairs = ((items[i], q) for i in range(len(items)) for q in items[i + 1:])
        else:
            focus = set(focus) & self.domain
            pairs = (
                ((x, self._forward[x]), q)
                for x in sorted(focus)
                for q in items
                if q[0] != x and (q[0] not in focus or q[0] > x)
            )
        for (x, fx), (y, fy) in pairs:
            if oracle.pair_code(x, y) != oracle.pair_code(fx, fy):
                bad.append((x, y))
                if limit is not None and len(bad) >= limit:
                    return bad
        return bad

    def is_type_preserving(self, oracle: StructureOracle) -> bool:
        return not self.type_violations(oracle, limit=1)
