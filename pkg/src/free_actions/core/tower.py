"""
Imaginary classes of the equivalence-relation tower.

In the tower every automorphism g fixes, for each x, the E_n-class of x for the
least n with E_n(x, g(x)); finite support makes such n exist. So no free action
exists on the imaginary sort of E_n-classes even though the home sort has one.
"""

from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from loguru import logger

from src.free_actions.core.errors import FreeActionError
from src.free_actions.core.neumann import separate
from src.free_actions.core.partial import PartialAutomorphism
from src.free_actions.core.structures import (
    EQ,
    Element,
    EquivTowerOracle,
    OracleKind,
    StructureOracle,
)


@dataclass(frozen=True)
class ImaginaryClass:
    """The E_index-class of `representative`; equal classes share index and class id."""

    index: int
    class_id: int
    representative: Element = field(compare=False)


def imaginary_class(oracle: EquivTowerOracle, x: Element, n: int) -> ImaginaryClass:
    if n < 1:
        raise ValueError(f"Relation index starts at 1, got {n}")
    return ImaginaryClass(n, oracle.coordinate(x, n), x)


def tower_fixed_class(oracle: EquivTowerOracle, f: PartialAutomorphism, x: Element) -> ImaginaryClass:
    """The class of x fixed by f: least n with E_n(x, f(x))."""
    if x not in f:
        raise KeyError(f"{x} is not in the domain of the map")
    code = oracle.pair_code(x, f(x))
    differing = set() if code == EQ else set(code)
    n = 1
    while n in differing:
        n += 1
    return imaginary_class(oracle, x, n)


@dataclass
class TowerDemoReport:
    x: Element
    depth: int
    candidates: int
    exhaustive: bool
    separated: bool
    fixed_index_counts: Dict[int, int] = field(default_factory=dict)
    max_fixed_index: int = 0
    separating_image: Optional[Element] = None


def tower_neumann_failure_demo(
    oracle: EquivTowerOracle, x: Element, budget: int, depth: Optional[int] = None
) -> TowerDemoReport:
    """Try every window image y of x (up to `budget`) as g(x) and ask whether g moves
    the classes {E_n-class of x : n <= depth + 1} to a disjoint set.

    Every candidate is a partial automorphism (the home sort is transitive), so
    the search covers all ways an automorphism can act on x within the window.
    """
    if oracle.kind is not OracleKind.EQUIV_TOWER:
        raise TypeError("The imaginary-class demonstration needs an EquivTower oracle")
    depth = oracle.support_depth() if depth is None else depth
    pool = range(min(budget, oracle.size))
    counts: Counter = Counter()
    report = TowerDemoReport(
        x=x, depth=depth, candidates=len(pool), exhaustive=len(pool) == oracle.size, separated=False
    )
    for y in pool:
        g = PartialAutomorphism({x: y})
        fixed = tower_fixed_class(oracle, g, x)
        counts[fixed.index] += 1
        if fixed.index > depth + 1:
            report.separated = True
            report.separating_image = y
            break
    report.fixed_index_counts = dict(sorted(counts.items()))
    report.max_fixed_index = max(counts, default=0)
    logger.info(
        f"Tower demo for x={x}: {report.candidates} candidates, "
        f"{'separated' if report.separated else 'every candidate fixes a class'} "
        f"(max fixed index {report.max_fixed_index}, depth {depth})"
    )
    return report


def home_sort_control(oracle: StructureOracle, x: Element) -> Dict:
    """The same question in the home sort: move {x} off itself."""
    try:
        witness = separate(oracle, {x}, {x})
    except FreeActionError as e:
        return {"oracle": oracle.kind.value, "x": x, "separated": False, "reason": str(e)}
    return {
        "oracle": oracle.kind.value,
        "x": x,
        "separated": witness.verify(oracle),
        "image": witness.mover(x),
    }


def fixed_classes_over_domain(oracle: EquivTowerOracle, f: PartialAutomorphism) -> List[ImaginaryClass]:
    return [tower_fixed_class(oracle, f, x) for x in f]
