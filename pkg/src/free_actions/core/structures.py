"""
Finite windows of countable homogeneous structures.

An oracle presents a homogeneous structure as a monotone chain of finite
windows. Element ids are stable: window(level) is always the prefix
range(size_at(level)) of the element list, and a window only ever gains
elements. Windows grow in two ways:

* schedule levels (`grow`), which enlarge every orbit class, and
* directed witnesses (`add_witness`), which realise one requested one-point
  type over a finite base (the extension property of the limit, used lazily).

Every element addition is journaled with an oracle-specific payload, so a
window can be rebuilt exactly from (kind, seed, params, journal).
"""

import copy
import threading
from abc import ABC, abstractmethod
from bisect import bisect_left, bisect_right, insort
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from itertools import combinations, product
from typing import Dict, FrozenSet, Hashable, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from src.free_actions.config import (
    CLOSURE_ROUNDS,
    DEFAULT_MAX_LEVEL,
    EXTENSION_CAP,
    MAX_WINDOW_SIZE,
    RANDOM_BLOCK,
)
from src.free_actions.core.errors import (
    ArityMismatch,
    ElementNotInStructure,
    InconsistentDemand,
    InvariantViolation,
    ResourceLimitExceeded,
)

Element = int
Code = Hashable

EQ = "="


class OracleKind(str, Enum):
    RANDOM_GRAPH = "RandomGraph"
    DENSE_LINEAR_ORDER = "DenseLinearOrder"
    EQUIV_TOWER = "EquivTower"
    PURE_SET = "PureSet"

    @classmethod
    def parse(cls, value: str) -> "OracleKind":
        key = value.replace("_", "").replace("-", "").lower()
        for kind in cls:
            if kind.value.lower() == key:
                return kind
        aliases = {"graph": cls.RANDOM_GRAPH, "dlo": cls.DENSE_LINEAR_ORDER,
                   "tower": cls.EQUIV_TOWER, "set": cls.PURE_SET}
        if key in aliases:
            return aliases[key]
        raise ValueError(f"Unknown oracle kind: {value!r}")


def _flip(code: Code) -> Code:
    if code == "<":
        return ">"
    if code == ">":
        return "<"
    return code


@dataclass(frozen=True)
class QfType:
    """Quantifier-free type of an ordered tuple.

    `codes` lists one pair code per position pair (i, j), i < j, ordered by j
    then i, so the type of `base + (x,)` extends the type of `base` by one
    column. Equal types on a homogeneous window mean equal orbits in the limit.
    """

    kind: OracleKind
    arity: int
    codes: Tuple[Code, ...]

    def code(self, i: int, j: int) -> Code:
        if i == j:
            return EQ
        if i < j:
            return self.codes[j * (j - 1) // 2 + i]
        return _flip(self.codes[i * (i - 1) // 2 + j])

    def permuted(self, order: Sequence[int]) -> "QfType":
        """Type of the tuple (t[order[0]], t[order[1]], ...)."""
        if sorted(order) != list(range(self.arity)):
            raise ValueError(f"Not a permutation of range({self.arity}): {order}")
        codes = tuple(
            self.code(order[i], order[j]) for j in range(self.arity) for i in range(j)
        )
        return QfType(self.kind, self.arity, codes)

    def restrict(self, arity: int) -> "QfType":
        """Type of the prefix of length `arity`."""
        return QfType(self.kind, arity, self.codes[: arity * (arity - 1) // 2])

    def last_column(self) -> Tuple[Code, ...]:
        n = self.arity
        return self.codes[(n - 1) * (n - 2) // 2:] if n > 1 else ()

    @property
    def atoms(self) -> FrozenSet[str]:
        out = set()
        for j in range(self.arity):
            for i in range(j):
                out.update(_render_atoms(self.kind, self.code(i, j), i, j))
        return frozenset(out)


def _render_atoms(kind: OracleKind, code: Code, i: int, j: int) -> List[str]:
    x, y = f"x{i}", f"x{j}"
    if code == EQ:
        return [f"{x} = {y}"]
    atoms = [f"{x} != {y}"]
    if kind is OracleKind.RANDOM_GRAPH and code == "E":
        atoms.append(f"edge({x},{y})")
    elif kind is OracleKind.DENSE_LINEAR_ORDER:
        atoms.append(f"{x} {code} {y}")
    elif kind is OracleKind.EQUIV_TOWER:
        atoms.extend(f"~E{k}({x},{y})" for k in code)
        top = max(code) if code else 0
        atoms.append(f"Ei({x},{y}) for i>{top}")
    return atoms


@dataclass(frozen=True)
class ExtensionType:
    """One-point type over an ordered base: codes[i] = pair code (base[i], x)."""

    base: Tuple[Element, ...]
    codes: Tuple[Code, ...]

    def __post_init__(self):
        if len(self.base) != len(self.codes):
            raise ArityMismatch("Extension type needs one code per base element")

    def transported(self, base: Sequence[Element]) -> "ExtensionType":
        """Same codes over another base (the image of this base under a map)."""
        return ExtensionType(tuple(base), self.codes)


@dataclass
class WindowJournal:
    """Replayable growth history: element payloads and level boundaries."""

    level_sizes: List[int] = field(default_factory=list)
    payloads: List[str] = field(default_factory=list)


@dataclass(frozen=True)
class FiniteStructure:
    """Snapshot of an oracle window: the elements range(size) at `level`."""

    oracle: "StructureOracle" = field(repr=False, compare=False)
    level: int
    size: int

    @property
    def elements(self) -> range:
        return range(self.size)

    @property
    def signature(self) -> Dict[str, int]:
        return self.oracle.signature(self.size)

    @property
    def relations(self) -> Dict[str, FrozenSet[Tuple[Element, ...]]]:
        return {
            name: frozenset(self.oracle.relation_tuples(name, self.size))
            for name in self.signature
        }

    def __contains__(self, x: object) -> bool:
        return isinstance(x, (int, np.integer)) and 0 <= x < self.size

    def __len__(self) -> int:
        return self.size

    def __iter__(self) -> Iterator[Element]:
        return iter(self.elements)

    def export_lines(self) -> List[str]:
        """Line-oriented text: one element per line, one relation tuple per line."""
        lines = [f"window {self.oracle.kind.value} seed={self.oracle.seed} level={self.level}"]
        for x in self.elements:
            lines.append(f"element {x} {self.oracle.payload(x)}")
        for name, rel in sorted(self.relations.items()):
            for tup in sorted(rel):
                lines.append(f"relation {name} " + " ".join(str(v) for v in tup))
        return lines


class StructureOracle(ABC):
    """Lazy presentation of a countable homogeneous structure."""

    kind: OracleKind

    def __init__(self, seed: int = 0, max_window: int = MAX_WINDOW_SIZE, max_level: int = DEFAULT_MAX_LEVEL):
        self.seed = seed
        self.max_window = max_window
        self.max_level = max_level
        self.certificates: Dict[str, object] = {}
        self._level = -1
        self._level_sizes: List[int] = []
        self._payloads: List[str] = []
        self._lock = threading.RLock()
        self.grow()

    # -- state ----------------------------------------------------------------

    def __getstate__(self):
        state = self.__dict__.copy()
        del state["_lock"]
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._lock = threading.RLock()

    @property
    def level(self) -> int:
        return self._level

    @property
    def size(self) -> int:
        return len(self._payloads)

    @property
    def params(self) -> Dict[str, object]:
        return {}

    def size_at(self, level: int) -> int:
        if level < 0:
            raise ValueError(f"Window level must be >= 0, got {level}")
        return self._level_sizes[level]

    def fork(self) -> "StructureOracle":
        """Independent scratch copy with the same window and journal."""
        return copy.deepcopy(self)

    def journal(self) -> WindowJournal:
        return WindowJournal(list(self._level_sizes), list(self._payloads))

    def replay(self, journal: WindowJournal) -> None:
        """Rebuild the window from a journal (the oracle must be fresh)."""
        with self._lock:
            self._reset()
            start = 0
            for level, end in enumerate(journal.level_sizes):
                self._level_sizes.append(self.size)
                self._level = level
                for payload in journal.payloads[start:end]:
                    self._append(self._decode(payload))
                if self.size != end:
                    raise InvariantViolation(f"Journal level {level} ends at {end}, replay reached {self.size}")
                self._level_sizes[-1] = end
                start = end
            if start != len(journal.payloads):
                raise InvariantViolation("Journal payloads beyond the last level boundary")

    def _reset(self) -> None:
        self._level = -1
        self._level_sizes = []
        self._payloads = []
        self.certificates = {}

    def _register(self, payload) -> Element:
        if self.size >= self.max_window:
            raise ResourceLimitExceeded(
                f"{self.kind.value} window would exceed max size {self.max_window}"
            )
        self._payloads.append(self._encode(payload))
        if self._level_sizes:
            self._level_sizes[-1] = self.size
        return self.size - 1

    # -- growth ---------------------------------------------------------------

    def grow(self) -> FiniteStructure:
        """Add one schedule level; every orbit class over a fixed base grows."""
        with self._lock:
            level = self._level + 1
            if level > self.max_level:
                raise ResourceLimitExceeded(
                    f"{self.kind.value} window level {level} exceeds max level {self.max_level}"
                )
            self._level_sizes.append(self.size)
            self._level = level
            self._schedule_level(level)
            self._level_sizes[-1] = self.size
            logger.debug(f"{self.kind.value} grew to level {level} ({self.size} elements)")
            return FiniteStructure(self, level, self.size)

    def window(self, level: int) -> FiniteStructure:
        if level < 0:
            raise ValueError(f"Window level must be >= 0, got {level}")
        while self._level < level:
            self.grow()
        return FiniteStructure(self, level, self.size_at(level))

    def current(self) -> FiniteStructure:
        return FiniteStructure(self, self._level, self.size)

    def add_witness(self, ext: ExtensionType) -> Element:
        """Realise `ext`, creating a new element unless the type forces equality."""
        with self._lock:
            self._check_base(ext.base)
            forced = self._forced_equal(ext)
            if forced is not None:
                return forced
            x = self._create_witness(ext)
            if self.extension_type(ext.base, x).codes != ext.codes:
                raise InvariantViolation(f"{self.kind.value} witness {x} does not realise its demand")
            return x

    # -- types ----------------------------------------------------------------

    def pair_code(self, x: Element, y: Element) -> Code:
        if x == y:
            return EQ
        return self._pair_code(x, y)

    def extension_type(self, base: Sequence[Element], x: Element) -> ExtensionType:
        return ExtensionType(tuple(base), tuple(self.pair_code(b, x) for b in base))

    def candidates(
        self, ext: ExtensionType, exclude: Iterable[Element] = (), limit: Optional[int] = None
    ) -> Iterator[Element]:
        """Window elements realising `ext`, ascending by id, skipping `exclude`."""
        self._check_base(ext.base)
        excluded = set(exclude)
        forced = self._forced_equal(ext)
        if forced is not None:
            if forced not in excluded:
                yield forced
            return
        yield from self._candidates(ext, excluded, self.size if limit is None else limit)

    def _candidates(self, ext: ExtensionType, excluded: set, limit: int) -> Iterator[Element]:
        base_set = set(ext.base)
        for x in range(limit):
            if x in excluded or x in base_set:
                continue
            if all(self._pair_code(b, x) == c for b, c in zip(ext.base, ext.codes)):
                yield x

    def _forced_equal(self, ext: ExtensionType) -> Optional[Element]:
        """If the type says x = base[i], return base[i] after a consistency check."""
        for b, c in zip(ext.base, ext.codes):
            if c == EQ:
                for b2, c2 in zip(ext.base, ext.codes):
                    if self.pair_code(b2, b) != c2:
                        raise InconsistentDemand(
                            f"Demand equates x with {b} but disagrees with {b2}"
                        )
                return b
        return None

    def _check_base(self, base: Iterable[Element]) -> None:
        for b in base:
            if not (0 <= b < self.size):
                raise ElementNotInStructure(f"Element {b} is not in the current window")

    # -- oracle specifics -------------------------------------------------------

    @abstractmethod
    def _pair_code(self, x: Element, y: Element) -> Code:
        """Pair code for distinct elements."""

    @abstractmethod
    def _schedule_level(self, level: int) -> None:
        ...

    @abstractmethod
    def _create_witness(self, ext: ExtensionType) -> Element:
        ...

    @abstractmethod
    def _append(self, payload) -> Element:
        ...

    @abstractmethod
    def _encode(self, payload) -> str:
        ...

    @abstractmethod
    def _decode(self, text: str):
        ...

    def payload(self, x: Element) -> str:
        return self._payloads[x]

    def signature(self, size: int) -> Dict[str, int]:
        return {}

    def relation_tuples(self, name: str, size: int) -> Iterator[Tuple[Element, ...]]:
        return iter(())


class PureSetOracle(StructureOracle):
    """The trivial structure; Aut is Sym(N). Level l has 2^l - 1 elements."""

    kind = OracleKind.PURE_SET

    def _pair_code(self, x, y):
        return "!="

    def _schedule_level(self, level):
        if level == 0:
            return
        for _ in range(2 ** (level - 1)):
            self._append(None)

    def _create_witness(self, ext):
        return self._append(None)

    def _append(self, payload):
        return self._register(payload)

    def _encode(self, payload):
        return "-"

    def _decode(self, text):
        return None


class DenseLinearOrderOracle(StructureOracle):
    """(Q, <) by dyadic refinement: each level adds a point in every gap and at both ends."""

    kind = OracleKind.DENSE_LINEAR_ORDER

    def _reset(self):
        super()._reset()
        self._positions: List[Fraction] = []
        self._sorted_pos: List[Fraction] = []
        self._sorted_ids: List[Element] = []

    def __init__(self, seed: int = 0, max_window: int = MAX_WINDOW_SIZE, max_level: int = DEFAULT_MAX_LEVEL):
        self._positions = []
        self._sorted_pos = []
        self._sorted_ids = []
        super().__init__(seed=seed, max_window=max_window, max_level=max_level)

    def position(self, x: Element) -> Fraction:
        return self._positions[x]

    def _pair_code(self, x, y):
        return "<" if self._positions[x] < self._positions[y] else ">"

    def _schedule_level(self, level):
        if level == 0:
            return
        if not self._sorted_pos:
            self._append(Fraction(0))
            return
        old = list(self._sorted_pos)
        new = [old[0] - 1]
        new.extend((a + b) / 2 for a, b in zip(old, old[1:]))
        new.append(old[-1] + 1)
        if self.size + len(new) > self.max_window:
            raise ResourceLimitExceeded(
                f"{self.kind.value} level {level} would exceed max size {self.max_window}"
            )
        for pos in new:
            self._append(pos)

    def _append(self, payload):
        pos = Fraction(payload)
        x = self._register(pos)
        self._positions.append(pos)
        i = bisect_right(self._sorted_pos, pos)
        self._sorted_pos.insert(i, pos)
        self._sorted_ids.insert(i, x)
        return x

    def _bounds(self, ext: ExtensionType) -> Tuple[Optional[Fraction], Optional[Fraction]]:
        lo = hi = None
        for b, c in zip(ext.base, ext.codes):
            p = self._positions[b]
            if c == "<":
                lo = p if lo is None else max(lo, p)
            elif c == ">":
                hi = p if hi is None else min(hi, p)
            else:
                raise InconsistentDemand(f"Unknown order code {c!r}")
        if lo is not None and hi is not None and lo >= hi:
            raise InconsistentDemand("Demanded cut is empty: lower bound not below upper bound")
        return lo, hi

    def _candidates(self, ext, excluded, limit):
        lo, hi = self._bounds(ext)
        i = 0 if lo is None else bisect_right(self._sorted_pos, lo)
        j = len(self._sorted_pos) if hi is None else bisect_left(self._sorted_pos, hi)
        ids = sorted(x for x in self._sorted_ids[i:j] if x < limit and x not in excluded)
        yield from ids

    def _create_witness(self, ext):
        lo, hi = self._bounds(ext)
        i = 0 if lo is None else bisect_right(self._sorted_pos, lo)
        nxt = self._sorted_pos[i] if i < len(self._sorted_pos) else None
        if lo is None and nxt is None:
            pos = Fraction(0)
        elif lo is None:
            pos = nxt - 1
        elif nxt is None:
            pos = lo + 1
        else:
            pos = (lo + nxt) / 2
        return self._append(pos)

    def _encode(self, payload):
        return str(Fraction(payload))

    def _decode(self, text):
        return Fraction(text)

    def signature(self, size):
        return {"lt": 2}

    def relation_tuples(self, name, size):
        order = [x for x in self._sorted_ids if x < size]
        for i, x in enumerate(order):
            for y in order[i + 1:]:
                yield (x, y)


class RandomGraphOracle(StructureOracle):
    """The Rado graph.

    Level l adds random_block * 2^(l-1) seeded random vertices and then closes
    the window under k-extension demands, k = min(l, extension_cap): for all
    disjoint U, V with |U u V| <= k some vertex is adjacent to all of U and to
    none of V. Adjacency rows are Python int bitsets.
    """

    kind = OracleKind.RANDOM_GRAPH

    def __init__(
        self,
        seed: int = 0,
        max_window: int = MAX_WINDOW_SIZE,
        max_level: int = DEFAULT_MAX_LEVEL,
        extension_cap: int = EXTENSION_CAP,
        random_block: int = RANDOM_BLOCK,
        closure_rounds: int = CLOSURE_ROUNDS,
    ):
        self.extension_cap = extension_cap
        self.random_block = random_block
        self.closure_rounds = closure_rounds
        self._rows: List[int] = []
        self._closed_k = 0
        self._closed_size = 0
        super().__init__(seed=seed, max_window=max_window, max_level=max_level)

    @property
    def params(self):
        return {"extension_cap": self.extension_cap, "random_block": self.random_block}

    def _reset(self):
        super()._reset()
        self._rows = []
        self._closed_k = 0
        self._closed_size = 0

    def declared_extension_level(self, level: Optional[int] = None) -> int:
        return min(self._level if level is None else level, self.extension_cap)

    def adjacent(self, x: Element, y: Element) -> bool:
        return bool(self._rows[x] >> y & 1)

    def row(self, x: Element) -> int:
        return self._rows[x]

    def _pair_code(self, x, y):
        return "E" if self._rows[x] >> y & 1 else "N"

    def _append(self, payload):
        forced_in, forced_out = payload if payload else ((), ())
        v = self.size
        bits = np.random.default_rng([self.seed, v]).integers(0, 2, size=v, dtype=np.uint8)
        for u in forced_in:
            bits[u] = 1
        for u in forced_out:
            bits[u] = 0
        self._register(payload)
        row = int.from_bytes(np.packbits(bits, bitorder="little").tobytes(), "little") if v else 0
        self._rows.append(row)
        flag = 1 << v
        for u in np.flatnonzero(bits):
            self._rows[int(u)] |= flag
        return v

    def _schedule_level(self, level):
        if level == 0:
            return
        for _ in range(self.random_block * 2 ** (level - 1)):
            self._append(None)
        self.close(self.declared_extension_level(level))

    def close(self, k: int) -> None:
        """Add witnesses until every (U, V) demand with |U u V| <= k is met.

        Demands over elements that were present at the last completed closure
        stay met; every subset reaching past that point is rechecked, directed
        witnesses included.
        """
        fresh_from = self._closed_size if k <= self._closed_k else 0
        for round_no in range(self.closure_rounds):
            missing = self.unsatisfied(k, self.size, fresh_from=fresh_from)
            if not missing:
                self._closed_k = max(self._closed_k, k)
                self._closed_size = self.size
                return
            logger.debug(
                f"RandomGraph closure round {round_no}: {len(missing)} unmet {k}-extension demands"
            )
            fresh_from = self.size
            for u_set, v_set in missing:
                self._append((tuple(u_set), tuple(v_set)))
        raise ResourceLimitExceeded(f"{k}-extension closure did not settle in {self.closure_rounds} rounds")

    def unsatisfied(self, k: int, size: int, fresh_from: int = 0) -> List[Tuple[Tuple[int, ...], Tuple[int, ...]]]:
        """All (U, V) demands over range(size) with |U u V| <= k that have no witness."""
        full = (1 << size) - 1
        rows = [r & full for r in self._rows[:size]]
        missing = []
        for m in range(k + 1):
            for subset in combinations(range(size), m):
                if m and subset[-1] < fresh_from:
                    continue
                if not m and fresh_from:
                    continue
                outside = full
                for s in subset:
                    outside &= ~(1 << s)
                for signs in product((True, False), repeat=m):
                    mask = outside
                    for s, inside in zip(subset, signs):
                        mask &= rows[s] if inside else ~rows[s]
                        if not mask:
                            break
                    if not mask:
                        u_set = tuple(s for s, inside in zip(subset, signs) if inside)
                        v_set = tuple(s for s, inside in zip(subset, signs) if not inside)
                        missing.append((u_set, v_set))
        return missing

    def _candidates(self, ext, excluded, limit):
        mask = (1 << limit) - 1
        for b, c in zip(ext.base, ext.codes):
            if c == "E":
                mask &= self._rows[b]
            elif c == "N":
                mask &= ~self._rows[b]
            else:
                raise InconsistentDemand(f"Unknown graph code {c!r}")
            mask &= ~(1 << b)
        for x in excluded:
            mask &= ~(1 << x)
        while mask:
            low = mask & -mask
            yield low.bit_length() - 1
            mask ^= low

    def _create_witness(self, ext):
        u_set = tuple(b for b, c in zip(ext.base, ext.codes) if c == "E")
        v_set = tuple(b for b, c in zip(ext.base, ext.codes) if c == "N")
        if len(set(u_set) | set(v_set)) != len(ext.base) or set(u_set) & set(v_set):
            raise InconsistentDemand("Graph demand lists a vertex twice or with both codes")
        return self._append((u_set, v_set))

    def _encode(self, payload):
        if not payload:
            return "r"
        u_set, v_set = payload
        return "U" + ",".join(map(str, u_set)) + "|V" + ",".join(map(str, v_set))

    def _decode(self, text):
        if text == "r":
            return None
        u_part, v_part = text.split("|")
        parse = lambda s: tuple(int(t) for t in s[1:].split(",") if t)
        return parse(u_part), parse(v_part)

    def signature(self, size):
        return {"edge": 2}

    def relation_tuples(self, name, size):
        for x in range(size):
            row = self._rows[x] & ((1 << size) - 1)
            while row:
                low = row & -row
                yield (x, low.bit_length() - 1)
                row ^= low


TowerElement = Tuple[Tuple[int, ...], int]


class EquivTowerOracle(StructureOracle):
    """Countably many independent equivalence relations E_1, E_2, ...

    An element is a finitely supported class-id vector together with a copy
    index; E_k(x, y) iff the vectors agree in coordinate k. Copies make every
    E-type over a finite base infinite, so acl(E) = E. Level l holds vectors
    supported in the first min(l, depth) coordinates with class ids < l + 2,
    in copies 0..max(l, 1) - 1.
    """

    kind = OracleKind.EQUIV_TOWER

    def __init__(
        self,
        seed: int = 0,
        max_window: int = MAX_WINDOW_SIZE,
        max_level: int = DEFAULT_MAX_LEVEL,
        depth: Optional[int] = None,
    ):
        self.depth = depth
        self._elements: List[TowerElement] = []
        self._index: Dict[TowerElement, Element] = {}
        self._copies: Dict[Tuple[int, ...], int] = {}
        self._max_value: Dict[int, int] = {}
        super().__init__(seed=seed, max_window=max_window, max_level=max_level)

    @property
    def params(self):
        return {"depth": self.depth}

    def _reset(self):
        super()._reset()
        self._elements = []
        self._index = {}
        self._copies = {}
        self._max_value = {}

    @staticmethod
    def strip(vector: Sequence[int]) -> Tuple[int, ...]:
        v = list(vector)
        while v and v[-1] == 0:
            v.pop()
        return tuple(v)

    def vector(self, x: Element) -> Tuple[int, ...]:
        return self._elements[x][0]

    def element_of(self, vector: Sequence[int], copy_index: int = 0) -> Element:
        key = (self.strip(vector), copy_index)
        if key not in self._index:
            raise ElementNotInStructure(f"Tower element {key} is not in the current window")
        return self._index[key]

    def coordinate(self, x: Element, k: int) -> int:
        v = self._elements[x][0]
        return v[k - 1] if k <= len(v) else 0

    def _pair_code(self, x, y):
        a, b = self._elements[x][0], self._elements[y][0]
        n = max(len(a), len(b))
        a = a + (0,) * (n - len(a))
        b = b + (0,) * (n - len(b))
        return tuple(k + 1 for k in range(n) if a[k] != b[k])

    def _schedule_level(self, level):
        coords = level if self.depth is None else min(level, self.depth)
        copies = max(level, 1)
        fresh = []
        for c in range(copies):
            for raw in product(range(level + 2), repeat=coords):
                key = (self.strip(raw), c)
                if key not in self._index:
                    fresh.append(key)
        if self.size + len(fresh) > self.max_window:
            raise ResourceLimitExceeded(
                f"{self.kind.value} level {level} would exceed max size {self.max_window}"
            )
        for key in fresh:
            self._append(key)

    def _append(self, payload):
        vector, c = payload
        key = (self.strip(vector), int(c))
        if key in self._index:
            raise InvariantViolation(f"Tower element {key} added twice")
        x = self._register(key)
        self._elements.append(key)
        self._index[key] = x
        self._copies[key[0]] = max(self._copies.get(key[0], 0), key[1] + 1)
        for k, value in enumerate(key[0], start=1):
            self._max_value[k] = max(self._max_value.get(k, 0), value)
        return x

    def _create_witness(self, ext):
        top = max((max(c) for c in ext.codes if c), default=0)
        top = max([top] + [len(self.vector(b)) for b in ext.base])
        vector = []
        for k in range(1, top + 1):
            same = {self.coordinate(b, k) for b, c in zip(ext.base, ext.codes) if k not in c}
            differ = {self.coordinate(b, k) for b, c in zip(ext.base, ext.codes) if k in c}
            if len(same) > 1:
                raise InconsistentDemand(f"Demand puts x in two E{k}-classes")
            if same:
                value = same.pop()
                if value in differ:
                    raise InconsistentDemand(f"Demand puts x both in and out of an E{k}-class")
            else:
                value = self._max_value.get(k, 0) + 1
            vector.append(value)
        vector = self.strip(vector)
        return self._append((vector, self._copies.get(vector, 0)))

    def _encode(self, payload):
        vector, c = payload
        return ".".join(map(str, vector)) + f"#{c}"

    def _decode(self, text):
        vec, c = text.split("#")
        return tuple(int(t) for t in vec.split(".") if t), int(c)

    def support_depth(self, size: Optional[int] = None) -> int:
        return max((len(v) for v, _ in self._elements[: size or self.size]), default=0)

    def signature(self, size):
        return {f"E{k}": 2 for k in range(1, self.support_depth(size) + 2)}

    def relation_tuples(self, name, size):
        k = int(name[1:])
        for x in range(size):
            for y in range(size):
                if self.coordinate(x, k) == self.coordinate(y, k):
                    yield (x, y)


_ORACLES = {
    OracleKind.PURE_SET: PureSetOracle,
    OracleKind.DENSE_LINEAR_ORDER: DenseLinearOrderOracle,
    OracleKind.RANDOM_GRAPH: RandomGraphOracle,
    OracleKind.EQUIV_TOWER: EquivTowerOracle,
}


def make_oracle(kind, seed: int = 0, **params) -> StructureOracle:
    """Build an oracle by kind; params are passed through (None values dropped)."""
    kind = kind if isinstance(kind, OracleKind) else OracleKind.parse(str(kind))
    params = {k: v for k, v in params.items() if v is not None}
    return _ORACLES[kind](seed=seed, **params)


# -- module operations ---------------------------------------------------------


def window(oracle: StructureOracle, level: int) -> FiniteStructure:
    """The level-th window, growing the oracle if needed."""
    return oracle.window(level)


def qf_type(s: FiniteStructure, t: Sequence[Element]) -> QfType:
    for x in t:
        if x not in s:
            raise ElementNotInStructure(f"Element {x} is not in the level-{s.level} window")
    oracle = s.oracle
    codes = tuple(oracle.pair_code(t[i], t[j]) for j in range(len(t)) for i in range(j))
    return QfType(oracle.kind, len(t), codes)


def same_orbit(oracle: StructureOracle, t1: Sequence[Element], t2: Sequence[Element]) -> bool:
    if len(t1) != len(t2):
        raise ArityMismatch(f"Tuples have arities {len(t1)} and {len(t2)}")
    s = oracle.current()
    return qf_type(s, t1) == qf_type(s, t2)


def realize_extension(
    oracle: StructureOracle,
    base: Sequence[Element],
    demand,
    avoid: Iterable[Element] = (),
) -> Element:
    """Least window element realising `demand` over `base`, growing the window if none does.

    `demand` is either a QfType of arity len(base) + 1 whose prefix is the type
    of `base`, or an ExtensionType over `base`.
    """
    base = tuple(base)
    s = oracle.current()
    if isinstance(demand, QfType):
        if demand.arity != len(base) + 1:
            raise ArityMismatch(f"Demand has arity {demand.arity}, base has {len(base)} elements")
        if demand.restrict(len(base)) != qf_type(s, base):
            raise InconsistentDemand("Demand disagrees with the type of the base")
        ext = ExtensionType(base, demand.last_column())
    else:
        ext = demand.transported(base) if demand.base != base else demand
    avoid = set(avoid)
    for x in oracle.candidates(ext, exclude=avoid):
        return x
    x = oracle.add_witness(ext)
    if x in avoid:
        raise InconsistentDemand(f"Demand forces the avoided element {x}")
    logger.debug(f"{oracle.kind.value}: materialised witness {x} over {len(base)} base elements")
    return x


def extension_check(oracle: StructureOracle, k: int, level: Optional[int] = None):
    """Unmet k-extension demands of the (level) window; empty means the property holds."""
    if not isinstance(oracle, RandomGraphOracle):
        raise TypeError("The k-extension property is checked for RandomGraph windows")
    size = oracle.size if level is None else oracle.window(level).size
    return oracle.unsatisfied(k, size)
