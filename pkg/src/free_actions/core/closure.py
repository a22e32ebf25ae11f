"""
Orbit partitions over a finite base and algebraic closure with growth certificates.

Orbits of the pointwise stabiliser G_E on window tuples are read off as
quantifier-free types over E (the oracles are homogeneous). acl(E) is the union
of the finite G_E-orbits; a class is certified finite when its size stays put
over two consecutive window levels of a scratch copy of the oracle.
"""

from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from src.free_actions.config import ACL_ROUNDS, CERTIFY_MAX
from src.free_actions.core.errors import AclIndeterminate, ElementNotInStructure, ResourceLimitExceeded
from src.free_actions.core.structures import (
    Element,
    ExtensionType,
    QfType,
    StructureOracle,
    qf_type,
)


@dataclass
class OrbitPartition:
    base: Tuple[Element, ...]
    arity: int
    level: int
    injective: bool
    sizes: Dict[QfType, int] = field(default_factory=dict)
    representatives: Dict[QfType, Tuple[Element, ...]] = field(default_factory=dict)

    @property
    def class_count(self) -> int:
        return len(self.sizes)

    @property
    def tuple_count(self) -> int:
        return sum(self.sizes.values())


@dataclass(frozen=True)
class ClassCertificate:
    """Size history of one G_E-orbit class while the oracle was grown."""

    extension: ExtensionType
    sizes: Tuple[int, ...]
    stable_since: Optional[int]

    @property
    def finite(self) -> bool:
        return self.stable_since is not None


@dataclass
class AclResult:
    base: FrozenSet[Element]
    members: FrozenSet[Element]
    level: int
    method: str
    certificate: Dict[Element, ClassCertificate] = field(default_factory=dict)
    classes: List[ClassCertificate] = field(default_factory=list)

    @property
    def trivial(self) -> bool:
        return self.members == self.base


@dataclass
class NoAlgebraicityReport:
    oracle: str
    level: int
    samples: int
    passed: bool
    growth_rounds: int
    failures: List[Dict] = field(default_factory=list)


def _check_in_window(oracle: StructureOracle, elements: Iterable[Element], size: int) -> None:
    for x in elements:
        if not (0 <= x < size):
            raise ElementNotInStructure(f"Element {x} is not in the window ({size} elements)")


def orbit_partition(
    oracle: StructureOracle,
    E: Sequence[Element],
    n: int,
    level: int,
    injective: bool = False,
    limit: Optional[int] = None,
) -> OrbitPartition:
    """Partition window(level)^n by qf-type over E.

    With `injective=True` only tuples of pairwise distinct elements outside E
    are counted. `limit` restricts the tuple entries to the first `limit`
    elements of the window.
    """
    s = oracle.window(level)
    base = tuple(sorted(set(E)))
    _check_in_window(oracle, base, s.size)
    pool = [x for x in range(s.size if limit is None else min(limit, s.size))]
    if injective:
        pool = [x for x in pool if x not in base]

    universe = sorted(set(pool) | set(base))
    index = {x: i for i, x in enumerate(universe)}
    matrix = [[oracle.pair_code(u, v) for v in universe] for u in universe]
    base_codes = qf_type(s, base).codes

    counts: Counter = Counter()
    reps: Dict[Tuple, Tuple[Element, ...]] = {}

    def extend(prefix: Tuple[Element, ...], codes: Tuple) -> None:
        if len(prefix) == n:
            counts[codes] += 1
            reps.setdefault(codes, prefix)
            return
        rows = [matrix[index[b]] for b in base + prefix]
        for x in pool:
            if injective and x in prefix:
                continue
            j = index[x]
            extend(prefix + (x,), codes + tuple(row[j] for row in rows))

    extend((), base_codes)
    arity = len(base) + n
    partition = OrbitPartition(base=base, arity=n, level=level, injective=injective)
    for codes, size in counts.items():
        key = QfType(oracle.kind, arity, codes)
        partition.sizes[key] = size
        partition.representatives[key] = reps[codes]
    logger.debug(
        f"{oracle.kind.value} orbit partition over |E|={len(base)}, n={n}: "
        f"{partition.class_count} classes on {len(pool)} elements"
    )
    return partition


def acl(
    oracle: StructureOracle,
    E: Iterable[Element],
    level_max: int = ACL_ROUNDS,
    certify_max: int = CERTIFY_MAX,
) -> AclResult:
    """Algebraic closure of E, certified by class growth across window levels.

    A scratch fork of the oracle is grown one schedule level at a time, for at
    most `level_max` levels, and the size of every G_E-class is recorded at
    each level. A class whose size is unchanged over two consecutive levels is
    finite, one that grew over both is infinite; a class with any other history
    once `level_max` levels are spent is indeterminate. Bases larger than
    `certify_max` inherit the oracle-wide no-algebraicity certificate.
    """
    base = tuple(sorted(set(E)))
    _check_in_window(oracle, base, oracle.size)
    if len(base) > certify_max:
        certified = oracle.certificates.get("no_algebraicity")
        if certified is None:
            certified = certify_oracle(oracle)
        if certified.passed:
            return AclResult(frozenset(base), frozenset(base), oracle.level, "inherited")
        logger.warning(f"{oracle.kind.value} has no no-algebraicity certificate; certifying directly")

    scratch = oracle.fork()
    start = scratch.level
    # the level cap bounds the caller's window; the scratch copy is bounded by max_window only
    scratch.max_level = max(scratch.max_level, start + max(level_max, 2))
    members_of: Dict[Tuple, List[Element]] = {}
    history: Dict[Tuple, List[int]] = {}
    seen = 0

    def record(rounds_done: int) -> None:
        nonlocal seen
        for x in range(seen, scratch.size):
            members_of.setdefault(scratch.extension_type(base, x).codes, []).append(x)
        seen = scratch.size
        for codes, xs in members_of.items():
            history.setdefault(codes, [0] * rounds_done).append(len(xs))

    record(0)
    decided: Dict[Tuple, Optional[int]] = {}
    for round_no in range(1, max(level_max, 2) + 1):
        try:
            scratch.grow()
        except ResourceLimitExceeded as e:
            raise AclIndeterminate(
                f"acl({list(base)}) on {oracle.kind.value}: window cap reached after "
                f"{round_no - 1} growth levels"
            ) from e
        record(round_no)
        if round_no < 2:
            continue
        decided = {}
        for codes, sizes in history.items():
            a, b, c = sizes[-3], sizes[-2], sizes[-1]
            if a == b == c:
                decided[codes] = start + round_no - 2
            elif a < b < c:
                decided[codes] = None
        if len(decided) == len(history):
            break
    else:
        undecided = [codes for codes in history if codes not in decided]
        logger.warning(f"acl over {base}: {len(undecided)} classes without a verdict")
        raise AclIndeterminate(
            f"acl({list(base)}) on {oracle.kind.value}: no stabilisation verdict "
            f"for {len(undecided)} classes after {level_max} growth levels"
        )

    classes = [
        ClassCertificate(ExtensionType(base, codes), tuple(history[codes]), decided[codes])
        for codes in sorted(history, key=lambda c: members_of[c][0])
    ]
    certificate: Dict[Element, ClassCertificate] = {}
    for cert in classes:
        if cert.finite:
            for x in members_of[cert.extension.codes]:
                if x < oracle.size:
                    certificate[x] = cert
    members = frozenset(certificate) | frozenset(base)
    return AclResult(frozenset(base), members, oracle.level, "growth", certificate, classes)


def certify_oracle(
    oracle: StructureOracle, sample_size: int = 8, seed: int = 0
) -> NoAlgebraicityReport:
    """Oracle-wide no-algebraicity check at the current level, cached on the oracle."""
    report = assert_no_algebraicity(oracle, sample_size, oracle.level, seed=seed)
    if report.passed:
        oracle.certificates["no_algebraicity"] = report
    return report


def certify_empty_closure(oracle: StructureOracle) -> AclResult:
    """acl(empty) = empty, i.e. every 1-orbit is infinite; cached on the oracle."""
    cached = oracle.certificates.get("acl_empty")
    if cached is not None:
        return cached
    result = acl(oracle, ())
    if result.members:
        raise AclIndeterminate(
            f"{oracle.kind.value} has algebraic elements over the empty set: {sorted(result.members)}"
        )
    oracle.certificates["acl_empty"] = result
    return result


def assert_no_algebraicity(
    oracle: StructureOracle,
    sample_size: int,
    level: int,
    seed: int = 0,
    max_base: int = 3,
    level_max: int = ACL_ROUNDS,
) -> NoAlgebraicityReport:
    """Check acl(E) = E for the empty set and `sample_size` random E with |E| <= max_base."""
    s = oracle.window(level)
    rng = np.random.default_rng(seed)
    bases: List[Tuple[Element, ...]] = [()]
    for _ in range(sample_size):
        k = int(rng.integers(0, min(max_base, s.size) + 1))
        bases.append(tuple(sorted(int(x) for x in rng.choice(s.size, size=k, replace=False))))

    report = NoAlgebraicityReport(
        oracle=oracle.kind.value, level=level, samples=len(bases), passed=True, growth_rounds=level_max
    )
    for E in bases:
        try:
            result = acl(oracle, E, level_max=level_max, certify_max=len(E))
        except AclIndeterminate as e:
            report.passed = False
            report.failures.append({"base": list(E), "reason": str(e)})
            continue
        extra = sorted(result.members - result.base)
        if extra:
            report.passed = False
            finite = {result.certificate[x].extension.codes for x in extra}
            report.failures.append(
                {
                    "base": list(E),
                    "reason": "finite orbit outside the base",
                    "orbit": extra,
                    "classes": [repr(c) for c in sorted(finite, key=repr)],
                }
            )
    logger.info(
        f"{oracle.kind.value} no-algebraicity check at level {level}: "
        f"{'pass' if report.passed else 'FAIL'} over {report.samples} bases"
    )
    return report
