"""
Back-and-forth construction of two partial automorphisms whose reduced words
have no fixed points, with the certification that goes with it.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

import networkx as nx
from loguru import logger
from tqdm import tqdm

from src.free_actions.config import (
    ACL_ROUNDS,
    CERTIFY_MAX,
    DEFAULT_CERT_DEPTH,
    SEARCH_LEVELS,
)
from src.free_actions.core.closure import (
    AclResult,
    acl,
    certify_empty_closure,
    certify_oracle,
)
from src.free_actions.core.errors import (
    InvariantViolation,
    NotFreeError,
    UncertifiedInput,
)
from src.free_actions.core.neumann import separate, separate_over
from src.free_actions.core.partial import PartialAutomorphism
from src.free_actions.core.structures import (
    Element,
    FiniteStructure,
    StructureOracle,
    realize_extension,
)
from src.free_actions.core.words import (
    A,
    A_INV,
    B,
    B_INV,
    step_function,
    walk,
    word_of_walk,
)


class Side(str, Enum):
    PHI = "phi"
    GAMMA = "gamma"


class Direction(str, Enum):
    DOMAIN = "domain"
    IMAGE = "image"


SCHEDULE = (
    (Side.PHI, Direction.DOMAIN),
    (Side.PHI, Direction.IMAGE),
    (Side.GAMMA, Direction.DOMAIN),
    (Side.GAMMA, Direction.IMAGE),
)


@dataclass(frozen=True)
class StepRecord:
    """One extension step, in the orientation where a domain is extended.

    The map A -> B is extended to C -> D while the other map is A2 -> B2; the
    fresh image must satisfy (C | B | A2 | B2) & D == B.
    """

    index: int
    side: Side
    direction: Direction
    C: Tuple[Element, ...]
    B: Tuple[Element, ...]
    A2: Tuple[Element, ...]
    B2: Tuple[Element, ...]
    D: Tuple[Element, ...]
    level: int

    def ledger_holds(self) -> bool:
        tracked = set(self.C) | set(self.B) | set(self.A2) | set(self.B2)
        return tracked & set(self.D) == set(self.B)

    def check(self) -> None:
        if not self.ledger_holds():
            tracked = set(self.C) | set(self.A2) | set(self.B2)
            stray = sorted(tracked & set(self.D) - set(self.B))
            raise InvariantViolation(f"Step {self.index}: fresh image meets tracked sets at {stray}")


@dataclass
class FixedPointReport:
    max_length: int
    elements: int = 0
    evaluations: int = 0
    violations: List[Tuple[str, Element]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def merge(self, other: "FixedPointReport") -> "FixedPointReport":
        if other.max_length != self.max_length:
            raise ValueError("Cannot merge fixed-point reports of different word lengths")
        return FixedPointReport(
            self.max_length,
            self.elements + other.elements,
            self.evaluations + other.evaluations,
            sorted(self.violations + other.violations, key=lambda v: (v[1], len(v[0]), v[0])),
        )


@dataclass
class FreePair:
    oracle: StructureOracle
    phi: PartialAutomorphism
    gamma: PartialAutomorphism
    cert_depth: int = DEFAULT_CERT_DEPTH
    steps: List[StepRecord] = field(default_factory=list)
    report: Optional[FixedPointReport] = None

    def map_for(self, side: Side) -> PartialAutomorphism:
        return self.phi if Side(side) is Side.PHI else self.gamma

    def covered(self) -> FrozenSet[Element]:
        return self.phi.domain | self.phi.image | self.gamma.domain | self.gamma.image


class FreePairBuilder:
    """Growing pair (phi, gamma) kept free of fixed points by the extension step."""

    def __init__(
        self,
        oracle: StructureOracle,
        phi: PartialAutomorphism,
        gamma: PartialAutomorphism,
        cert_depth: int = DEFAULT_CERT_DEPTH,
        acl_rounds: int = ACL_ROUNDS,
        certify_max: int = CERTIFY_MAX,
        search_levels: int = SEARCH_LEVELS,
    ):
        self.oracle = oracle
        self.phi = phi
        self.gamma = gamma
        self.cert_depth = cert_depth
        self.acl_rounds = acl_rounds
        self.certify_max = certify_max
        self.search_levels = search_levels
        self.steps: List[StepRecord] = []
        self.certified_length = cert_depth

    def map_for(self, side: Side) -> PartialAutomorphism:
        return self.phi if Side(side) is Side.PHI else self.gamma

    def _set(self, side: Side, value: PartialAutomorphism) -> None:
        if Side(side) is Side.PHI:
            self.phi = value
        else:
            self.gamma = value

    def pair(self) -> FreePair:
        return FreePair(self.oracle, self.phi, self.gamma, self.cert_depth, list(self.steps))

    def closure(self, elements: Iterable[Element]) -> AclResult:
        return acl(self.oracle, elements, level_max=self.acl_rounds, certify_max=self.certify_max)


def init_builder(
    oracle: StructureOracle,
    level: Optional[int] = None,
    cert_depth: int = DEFAULT_CERT_DEPTH,
    **options,
) -> FreePairBuilder:
    """Single-point phi and gamma with four distinct points, found by separation."""
    if level is not None:
        oracle.window(level)
    certify_empty_closure(oracle)
    if "no_algebraicity" not in oracle.certificates:
        certify_oracle(oracle)
    a0 = 0
    b0 = separate(oracle, {a0}, {a0}).mover(a0)
    a1 = separate(oracle, {a0}, {a0, b0}).mover(a0)
    b1 = separate(oracle, {a0}, {a0, b0, a1}).mover(a0)
    phi = PartialAutomorphism({a0: b0}, oracle.level)
    gamma = PartialAutomorphism({a1: b1}, oracle.level)
    if len({a0, b0, a1, b1}) != 4:
        raise InvariantViolation(f"Initial points are not distinct: {a0, b0, a1, b1}")
    logger.info(f"{oracle.kind.value}: initial pair phi={{{a0}->{b0}}}, gamma={{{a1}->{b1}}}")
    return FreePairBuilder(oracle, phi, gamma, cert_depth=cert_depth, **options)


def extend_step(
    builder: FreePairBuilder,
    side: Union[Side, str],
    direction: Union[Direction, str],
    target: Iterable[Element],
    certificate: Optional[AclResult] = None,
) -> FreePairBuilder:
    """Extend the domain (or image) of one map to `target`, keeping words fixed-point free.

    First any type-preserving extension C -> D' is found, then D' is moved over
    the old image B until it meets C, B, A2 and B2 only in B.
    """
    side, direction = Side(side), Direction(direction)
    oracle = builder.oracle
    current = builder.map_for(side)
    moving = current if direction is Direction.DOMAIN else current.inverse()
    other = builder.map_for(Side.GAMMA if side is Side.PHI else Side.PHI)
    target = frozenset(target)
    if not moving.domain <= target:
        raise ValueError(f"Target does not contain the current {direction.value} of {side.value}")
    if target == moving.domain:
        return builder

    certificate = certificate or builder.closure(target)
    if certificate.members != target:
        raise UncertifiedInput(f"Target {sorted(target)} is not acl-closed")

    A_set, B_set = moving.domain, moving.image
    base = sorted(A_set)
    fresh = sorted(target - A_set)
    images: List[Element] = []
    for i, c in enumerate(fresh):
        ext = oracle.extension_type(tuple(base) + tuple(fresh[:i]), c)
        images.append(realize_extension(oracle, [moving(b) for b in base] + images, ext))
    d_prime = moving.extended(dict(zip(fresh, images)))

    tracked = target | B_set | other.domain | other.image
    witness = separate_over(
        oracle, tracked, B_set, d_prime.image, max_growths=builder.search_levels
    )
    g = witness.mover
    extended = PartialAutomorphism({x: g(d_prime(x)) for x in d_prime.domain}, oracle.level)

    record = StepRecord(
        index=len(builder.steps),
        side=side,
        direction=direction,
        C=tuple(sorted(target)),
        B=tuple(sorted(B_set)),
        A2=tuple(sorted(other.domain)),
        B2=tuple(sorted(other.image)),
        D=tuple(sorted(extended.image)),
        level=oracle.level,
    )
    record.check()
    bad = extended.type_violations(oracle, limit=1, focus=fresh)
    if bad:
        raise InvariantViolation(f"Step {record.index}: extension breaks the type of {bad[0]}")

    builder._set(side, extended if direction is Direction.DOMAIN else extended.inverse())
    letter = {
        (Side.PHI, Direction.DOMAIN): A,
        (Side.PHI, Direction.IMAGE): A_INV,
        (Side.GAMMA, Direction.DOMAIN): B,
        (Side.GAMMA, Direction.IMAGE): B_INV,
    }[(side, direction)]
    violations = new_edge_violations(builder.phi, builder.gamma, fresh, letter, builder.cert_depth)
    if violations:
        word, x = violations[0]
        raise InvariantViolation(f"Step {record.index}: word {word} fixes {x}")
    builder.steps.append(record)
    logger.debug(
        f"Step {record.index}: {side.value} {direction.value} -> {len(target)} points "
        f"(window {oracle.size})"
    )
    return builder


def new_edge_violations(
    phi: PartialAutomorphism,
    gamma: PartialAutomorphism,
    starts: Sequence[Element],
    letter: int,
    max_len: int,
) -> List[Tuple[str, Element]]:
    """Closed reduced walks of length <= max_len that leave each start along `letter`.

    Any new fixed point of a reduced word must use a new edge, and a cyclic
    rotation (or the inverse) of its cyclically reduced core starts with it.
    """
    step = step_function(phi, gamma)
    found = []
    for x in starts:
        for path, y in walk(step, x, max_len, first=(letter,)):
            if y == x:
                found.append((str(word_of_walk(path)), x))
    return found


def build(
    oracle: StructureOracle,
    rounds: int,
    L_cert: int = DEFAULT_CERT_DEPTH,
    level: Optional[int] = None,
    workers: int = 1,
    progress: bool = False,
    **options,
) -> FreePair:
    """Round-robin back-and-forth: each round extends phi's domain, phi's image,
    gamma's domain and gamma's image by the least uncovered window element."""
    builder = init_builder(oracle, level=level, cert_depth=L_cert, **options)
    run_schedule(builder, rounds, progress=progress)
    return certified_pair(builder, workers=workers)


def run_schedule(builder: FreePairBuilder, rounds: int, progress: bool = False) -> FreePairBuilder:
    oracle = builder.oracle
    for round_no in tqdm(range(rounds), desc="Building free pair", disable=not progress):
        for side, direction in SCHEDULE:
            current = builder.map_for(side)
            covered = current.domain if direction is Direction.DOMAIN else current.image
            x = next(e for e in range(oracle.size + 1) if e not in covered)
            if x >= oracle.size:
                oracle.grow()
            certificate = builder.closure(covered | {x})
            extend_step(builder, side, direction, certificate.members, certificate=certificate)
        logger.debug(f"Round {round_no}: |dom phi|={len(builder.phi)}, |dom gamma|={len(builder.gamma)}")
    return builder


def certified_pair(builder: FreePairBuilder, workers: int = 1) -> FreePair:
    """Snapshot of the builder, with a full fixed-point check over the window."""
    pair = builder.pair()
    pair.report = check_fixed_points(pair, builder.cert_depth, workers=workers)
    if not pair.report.passed:
        logger.error(f"Built pair has fixed points: {pair.report.violations[:5]}")
        raise InvariantViolation(f"Built pair has {len(pair.report.violations)} fixed points")
    logger.info(
        f"{builder.oracle.kind.value}: pair with |dom phi|={len(pair.phi)}, "
        f"|dom gamma|={len(pair.gamma)} after {len(pair.steps)} steps, "
        f"{pair.report.evaluations} word evaluations clean"
    )
    return pair


def _fixed_points_on(pair: FreePair, L: int, elements: Sequence[Element]) -> FixedPointReport:
    report = FixedPointReport(L, elements=len(elements))
    step = step_function(pair.phi, pair.gamma)
    for x in elements:
        for path, y in walk(step, x, L):
            report.evaluations += 1
            if y == x:
                report.violations.append((str(word_of_walk(path)), x))
    return report


def check_fixed_points(
    pair: FreePair,
    L: int,
    window: Optional[FiniteStructure] = None,
    workers: int = 1,
) -> FixedPointReport:
    """Every reduced word of length <= L, at every window element where it is defined.

    `evaluations` counts the (word, element) pairs where the word is defined.
    """
    elements = list(window.elements if window is not None else range(pair.oracle.size))
    if workers <= 1 or len(elements) < 2 * workers:
        report = _fixed_points_on(pair, L, elements)
    else:
        chunks = [elements[i::workers] for i in range(workers)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda chunk: _fixed_points_on(pair, L, chunk), chunks))
        report = FixedPointReport(L)
        for part in parts:
            report = report.merge(part)
    report.violations.sort(key=lambda v: (v[1], len(v[0]), v[0]))
    return report


def schreier_ball(
    source: Union[FreePair, FreePairBuilder],
    base: Element,
    r: int,
    extend: bool = True,
) -> nx.MultiGraph:
    """Ball of radius r around `base` in the orbit graph of (phi, gamma).

    Edges are generator moves x -> phi(x) (label "a") and x -> gamma(x)
    (label "b"). Given a builder and `extend`, missing moves inside radius r - 1
    are added first by extension steps, so the ball is complete.
    """
    builder = source if isinstance(source, FreePairBuilder) else None
    depth: Dict[Element, int] = {base: 0}
    frontier = [base]
    for d in range(r):
        nxt = []
        for y in frontier:
            for c in (A, A_INV, B, B_INV):
                z = _move(source, builder if extend else None, c, y)
                if z is not None and z not in depth:
                    depth[z] = d + 1
                    nxt.append(z)
        frontier = nxt

    phi, gamma = source.phi, source.gamma
    graph = nx.MultiGraph(base=base, radius=r)
    for x, d in depth.items():
        graph.add_node(x, depth=d)
    for x in depth:
        for label, f in (("a", phi), ("b", gamma)):
            y = f.get(x)
            if y is not None and y in depth:
                graph.add_edge(x, y, label=label)
    return graph


def _move(source, builder: Optional[FreePairBuilder], c: int, y: Element) -> Optional[Element]:
    f = source.phi if c in (A, A_INV) else source.gamma
    z = f.get(y) if c in (A, B) else f.preimage(y)
    if z is not None or builder is None:
        return z
    side = Side.PHI if c in (A, A_INV) else Side.GAMMA
    direction = Direction.DOMAIN if c in (A, B) else Direction.IMAGE
    current = builder.map_for(side)
    covered = current.domain if direction is Direction.DOMAIN else current.image
    certificate = builder.closure(covered | {y})
    extend_step(builder, side, direction, certificate.members, certificate=certificate)
    f = builder.map_for(side)
    return f.get(y) if c in (A, B) else f.preimage(y)


def ball_size(r: int) -> int:
    """Vertices of the radius-r ball in the 4-regular tree."""
    return 1 + 2 * (3 ** r - 1)


def tree_ball_problems(graph: nx.MultiGraph, r: int) -> List[str]:
    """Why `graph` is not the radius-r ball of the 4-regular tree (empty if it is)."""
    problems = []
    if graph.number_of_nodes() != ball_size(r):
        problems.append(f"{graph.number_of_nodes()} vertices, expected {ball_size(r)}")
    if graph.number_of_nodes() and not nx.is_tree(graph):
        problems.append("ball contains a cycle")
    for x, d in graph.nodes(data="depth"):
        expected = 4 if d < r else 1
        if r == 0:
            expected = 0
        if graph.degree(x) != expected:
            problems.append(f"vertex {x} at depth {d} has degree {graph.degree(x)}")
            break
    return problems


def certify_tree_ball(graph: nx.MultiGraph, r: int) -> None:
    problems = tree_ball_problems(graph, r)
    if problems:
        raise NotFreeError(f"Schreier ball of radius {r} is not a tree ball: {'; '.join(problems)}")
