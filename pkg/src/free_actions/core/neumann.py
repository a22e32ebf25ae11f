"""
Separation of finite algebraically closed sets.

Both searches enumerate image tuples in id-lexicographic order, coordinate by
coordinate, filtering by type over the fixed base and by disjointness. When
the current window holds no witness the search grows the window along the
branch where it got stuck: the remaining coordinates are realised by fresh
elements of the required types, which the extension property of the limit
always allows once acl(empty) is trivial.
"""

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from loguru import logger

from src.free_actions.config import SEARCH_LEVELS, SEARCH_NODES
from src.free_actions.core.closure import AclResult
from src.free_actions.core.errors import (
    InvariantViolation,
    SearchBudgetExhausted,
    UncertifiedInput,
)
from src.free_actions.core.partial import PartialAutomorphism
from src.free_actions.core.structures import Element, ExtensionType, StructureOracle


@dataclass
class SeparationWitness:
    """mover fixes fixed_base pointwise and mover(moved_set) meets avoided_set only in the base."""

    mover: PartialAutomorphism
    fixed_base: FrozenSet[Element]
    moved_set: FrozenSet[Element]
    avoided_set: FrozenSet[Element]
    level: int
    growths: int = 0
    nodes: int = 0

    def problems(self, oracle: StructureOracle) -> List[str]:
        out = []
        if self.mover.domain != self.moved_set | self.fixed_base:
            out.append("mover domain differs from moved set plus base")
        if not self.mover.fixes_pointwise(self.fixed_base):
            out.append("mover does not fix the base pointwise")
        moved = {self.mover(x) for x in self.moved_set if x in self.mover}
        if moved & self.avoided_set != self.fixed_base & self.avoided_set:
            out.append(
                f"image meets avoided set outside the base: {sorted(moved & self.avoided_set - self.fixed_base)}"
            )
        bad = self.mover.type_violations(oracle, limit=1, focus=self.moved_set - self.fixed_base)
        if bad:
            out.append(f"mover breaks the type of {bad[0]}")
        return out

    def verify(self, oracle: StructureOracle) -> bool:
        return not self.problems(oracle)


@dataclass
class _Search:
    oracle: StructureOracle
    base: Tuple[Element, ...]
    sources: Tuple[Element, ...]
    avoid: FrozenSet[Element]
    node_budget: int
    nodes: int = 0
    deepest: Tuple[Element, ...] = ()
    columns: List[Tuple] = field(default_factory=list)

    def __post_init__(self):
        # codes of sources[i] over base + sources[:i]; realised over base + images[:i]
        self.columns = [
            self.oracle.extension_type(self.base + self.sources[:i], x).codes
            for i, x in enumerate(self.sources)
        ]

    def run(self) -> Optional[Tuple[Element, ...]]:
        return self._dfs(())

    def _dfs(self, images: Tuple[Element, ...]) -> Optional[Tuple[Element, ...]]:
        if len(images) > len(self.deepest):
            self.deepest = images
        i = len(images)
        if i == len(self.sources):
            return images
        ext = ExtensionType(self.base + images, self.columns[i])
        for y in self.oracle.candidates(ext, exclude=self.avoid):
            self.nodes += 1
            if self.nodes > self.node_budget:
                return None
            found = self._dfs(images + (y,))
            if found is not None:
                return found
        return None

    def complete_deepest(self) -> Tuple[Element, ...]:
        """Realise the remaining coordinates of the deepest branch with fresh witnesses."""
        images = self.deepest
        for i in range(len(images), len(self.sources)):
            y = self.oracle.add_witness(ExtensionType(self.base + images, self.columns[i]))
            if y in self.avoid or y in images:
                raise InvariantViolation(f"Directed witness {y} is not fresh")
            images = images + (y,)
        return images


def _require_empty_closure(oracle: StructureOracle) -> None:
    if "acl_empty" not in oracle.certificates:
        raise UncertifiedInput(
            f"{oracle.kind.value}: acl(empty) = empty is not certified; run certify_empty_closure first"
        )


def _require_closed(
    oracle: StructureOracle, name: str, elements: FrozenSet[Element], certificates: Dict[str, AclResult]
) -> None:
    if not elements:
        return
    cert = certificates.get(name)
    if cert is not None and cert.members == elements:
        return
    inherited = oracle.certificates.get("no_algebraicity")
    if inherited is not None and inherited.passed:
        return
    raise UncertifiedInput(f"Set {name} = {sorted(elements)} carries no acl-closure certificate")


def _search(
    oracle: StructureOracle,
    base: Tuple[Element, ...],
    sources: Tuple[Element, ...],
    avoid: FrozenSet[Element],
    max_growths: int,
    node_budget: int,
) -> Tuple[Tuple[Element, ...], int, int]:
    search = _Search(oracle, base, sources, avoid, node_budget)
    found = search.run()
    if found is not None:
        return found, 0, search.nodes
    if max_growths < 1:
        raise SearchBudgetExhausted(
            f"{oracle.kind.value}: no separating image in {oracle.size} elements and no growth allowed"
        )
    logger.debug(
        f"{oracle.kind.value}: no separating image in {oracle.size} elements "
        f"(stuck at depth {len(search.deepest)}/{len(sources)}); growing"
    )
    return search.complete_deepest(), 1, search.nodes


def separate(
    oracle: StructureOracle,
    A: Iterable[Element],
    B: Iterable[Element],
    level_hint: Optional[int] = None,
    max_growths: int = SEARCH_LEVELS,
    node_budget: int = SEARCH_NODES,
) -> SeparationWitness:
    """Type-preserving map on A whose image misses B (Neumann's lemma)."""
    _require_empty_closure(oracle)
    if level_hint is not None:
        oracle.window(level_hint)
    sources = tuple(sorted(set(A)))
    avoid = frozenset(B)
    if not sources:
        return SeparationWitness(PartialAutomorphism(level=oracle.level), frozenset(), frozenset(), avoid, oracle.level)
    images, growths, nodes = _search(oracle, (), sources, avoid, max_growths, node_budget)
    witness = SeparationWitness(
        mover=PartialAutomorphism(dict(zip(sources, images)), oracle.level),
        fixed_base=frozenset(),
        moved_set=frozenset(sources),
        avoided_set=avoid,
        level=oracle.level,
        growths=growths,
        nodes=nodes,
    )
    _check(oracle, witness)
    return witness


def separate_over(
    oracle: StructureOracle,
    A: Iterable[Element],
    B: Iterable[Element],
    C: Iterable[Element],
    certificates: Optional[Dict[str, AclResult]] = None,
    max_growths: int = SEARCH_LEVELS,
    node_budget: int = SEARCH_NODES,
) -> SeparationWitness:
    """Map fixing B pointwise with mover(C) meeting A exactly in B & A (relative form)."""
    _require_empty_closure(oracle)
    A, B, C = frozenset(A), frozenset(B), frozenset(C)
    if not B <= C:
        raise ValueError(f"Base {sorted(B)} is not contained in {sorted(C)}")
    certificates = certificates or {}
    for name, elements in (("A", A), ("B", B), ("C", C)):
        _require_closed(oracle, name, elements, certificates)

    base = tuple(sorted(B))
    sources = tuple(sorted(C - B))
    mapping = {b: b for b in base}
    growths = nodes = 0
    if sources:
        images, growths, nodes = _search(oracle, base, sources, A - B, max_growths, node_budget)
        mapping.update(zip(sources, images))
    witness = SeparationWitness(
        mover=PartialAutomorphism(mapping, oracle.level),
        fixed_base=B,
        moved_set=C,
        avoided_set=A,
        level=oracle.level,
        growths=growths,
        nodes=nodes,
    )
    _check(oracle, witness)
    return witness


def _check(oracle: StructureOracle, witness: SeparationWitness) -> None:
    problems = witness.problems(oracle)
    if problems:
        logger.error(f"Unsound separation witness: {problems}")
        raise InvariantViolation("; ".join(problems))
    if witness.growths:
        logger.info(
            f"{oracle.kind.value}: separation needed {witness.growths} directed growth(s), "
            f"window now {oracle.size} elements"
        )
