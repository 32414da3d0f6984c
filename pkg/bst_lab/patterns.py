"""
patterns.py
~~~~~~~~~~~
0/1 pattern matrices, order-preserving containment, tensor products and the
gadget constructors used to probe touch matrices.

Coordinates follow the point-set convention: a one at (col, row) with row 1
at the bottom, so the permutation (p_1, ..., p_k) has its ones at (p_i, i).
"""

from __future__ import annotations

import bisect
import itertools
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Literal, Sequence, Union

from bst_lab.geometry import Point, PointGrid, Rect
from bst_lab.settings import ResourceLimitError, gadget_node_cap

logger = logging.getLogger(__name__)

MatrixKind = Literal["permutation", "light", "general"]
Occurrence = dict[tuple[int, int], Point]


@dataclass(frozen=True)
class PatternMatrix:
    cols: int
    rows: int
    ones: frozenset[tuple[int, int]]

    def __post_init__(self) -> None:
        if self.cols < 0 or self.rows < 0:
            raise ValueError(f"Negative matrix size {self.cols}x{self.rows}")
        for c, r in self.ones:
            if not (1 <= c <= self.cols and 1 <= r <= self.rows):
                raise ValueError(f"One at ({c},{r}) lies outside {self.cols}x{self.rows}")

    @classmethod
    def from_permutation(cls, perm: Sequence[int]) -> "PatternMatrix":
        perm = tuple(perm)
        if sorted(perm) != list(range(1, len(perm) + 1)):
            raise ValueError(f"Not a permutation: {perm}")
        return cls(len(perm), len(perm), frozenset((v, i) for i, v in enumerate(perm, start=1)))

    @cached_property
    def kind(self) -> MatrixKind:
        per_col = [0] * (self.cols + 1)
        per_row = [0] * (self.rows + 1)
        for c, r in self.ones:
            per_col[c] += 1
            per_row[r] += 1
        light = all(k == 1 for k in per_col[1:])
        if light and self.cols == self.rows and all(k == 1 for k in per_row[1:]):
            return "permutation"
        return "light" if light else "general"

    def to_permutation(self) -> tuple[int, ...]:
        if self.kind != "permutation":
            raise ValueError(f"A {self.kind} matrix is not a permutation")
        by_row = {r: c for c, r in self.ones}
        return tuple(by_row[r] for r in range(1, self.rows + 1))

    def column_rows(self) -> list[tuple[int, ...]]:
        rows: list[list[int]] = [[] for _ in range(self.cols + 1)]
        for c, r in self.ones:
            rows[c].append(r)
        return [tuple(sorted(rs)) for rs in rows]

    def __str__(self) -> str:
        if self.kind == "permutation":
            return ",".join(map(str, self.to_permutation()))
        lines = []
        for r in range(self.rows, 0, -1):
            lines.append("".join("1" if (c, r) in self.ones else "." for c in range(1, self.cols + 1)))
        return "/".join(lines)


def tensor(p: PatternMatrix, g: PatternMatrix) -> PatternMatrix:
    """Replace every one of ``p`` by a copy of ``g``."""
    ones = frozenset(
        ((pc - 1) * g.cols + gc, (pr - 1) * g.rows + gr)
        for pc, pr in p.ones
        for gc, gr in g.ones
    )
    return PatternMatrix(p.cols * g.cols, p.rows * g.rows, ones)


# ──────────────────────────────────────────────────────────────────────────────
# Gadgets
# ──────────────────────────────────────────────────────────────────────────────

CAP = PatternMatrix(3, 2, frozenset({(1, 1), (3, 1), (2, 2)}))


def alternating_permutation(k: int) -> tuple[int, ...]:
    """(floor((k+1)/2), k, 1, k-1, 2, ...): alternately the largest and smallest unused value."""
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    first = (k + 1) // 2
    rest = [v for v in range(1, k + 1) if v != first]
    out = [first]
    lo, hi = 0, len(rest) - 1
    take_high = True
    while lo <= hi:
        if take_high:
            out.append(rest[hi])
            hi -= 1
        else:
            out.append(rest[lo])
            lo += 1
        take_high = not take_high
    return tuple(out)


def inc(k: int) -> PatternMatrix:
    """The gadget for k-increasing inputs: the descending permutation (k, ..., 1)."""
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    return PatternMatrix.from_permutation(range(k, 0, -1))


def dec(k: int) -> PatternMatrix:
    """The gadget for k-decreasing inputs: the ascending permutation (1, ..., k)."""
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    return PatternMatrix.from_permutation(range(1, k + 1))


def alt(k: int) -> PatternMatrix:
    return PatternMatrix.from_permutation(alternating_permutation(k))


def gadget(name: str, k: int | None = None) -> PatternMatrix:
    name = name.strip().lower()
    if name == "cap":
        return CAP
    builders = {"inc": inc, "dec": dec, "alt": alt}
    if name not in builders:
        raise ValueError(f"Unknown gadget {name!r}; expected cap, inc, dec or alt")
    if k is None:
        raise ValueError(f"Gadget {name!r} needs a size k")
    return builders[name](k)


def parse_gadget(text: str) -> PatternMatrix:
    """``cap`` or ``inc:k`` / ``dec:k`` / ``alt:k``."""
    name, _, size = text.partition(":")
    return gadget(name, int(size) if size else None)


def parse_pattern(text: str) -> PatternMatrix:
    return PatternMatrix.from_permutation([int(tok) for tok in text.split(",") if tok.strip()])


# ──────────────────────────────────────────────────────────────────────────────
# Containment
# ──────────────────────────────────────────────────────────────────────────────

Haystack = Union[PointGrid, PatternMatrix, Sequence[int]]


def _haystack_points(haystack: Haystack) -> tuple[Iterable[tuple[int, int]], tuple[int, int, int, int]]:
    if isinstance(haystack, PatternMatrix):
        return haystack.ones, (1, haystack.cols, 1, haystack.rows)
    if isinstance(haystack, PointGrid):
        pts = haystack.points
        if not pts:
            return pts, (1, 0, 1, 0)
        xs = [p.x for p in pts]
        ys = [p.y for p in pts]
        return pts, (min(1, min(xs)), max(haystack.width, max(xs)), min(ys), max(ys))
    keys = [int(x) for x in haystack]
    pts = [(x, t) for t, x in enumerate(keys, start=1)]
    return pts, (1, max(keys, default=0), 1, len(keys))


class _Matcher:
    def __init__(
        self, haystack: Haystack, needle: PatternMatrix, node_cap: int, window: Rect | None = None
    ) -> None:
        pts, (self.xlo, self.xhi, self.ylo, self.yhi) = _haystack_points(haystack)
        if window is not None:
            self.xlo, self.xhi, self.ylo, self.yhi = window.xmin, window.xmax, window.ymin, window.ymax
            pts = [(x, y) for x, y in pts if window.contains(Point(x, y))]
        by_col: dict[int, list[int]] = {}
        for x, y in pts:
            by_col.setdefault(x, []).append(y)
        self.cols = sorted(by_col)
        self.col_rows = {x: sorted(ys) for x, ys in by_col.items()}
        self.needle = needle
        self.needle_rows = needle.column_rows()
        self.node_cap = node_cap
        self.nodes = 0

    def _row_bounds(self, row_map: dict[int, int], r: int) -> tuple[int, int]:
        lo, hi = self.ylo + (r - 1), self.yhi - (self.needle.rows - r)
        for r2, y2 in row_map.items():
            if r2 < r:
                lo = max(lo, y2 + (r - r2))
            else:
                hi = min(hi, y2 - (r2 - r))
        return lo, hi

    def run(self) -> Iterator[Occurrence]:
        yield from self._columns(1, self.xlo - 1, 0, {}, {})

    def _columns(
        self, c: int, prev_x: int, prev_c: int, row_map: dict[int, int], found: Occurrence
    ) -> Iterator[Occurrence]:
        self.nodes += 1
        if self.nodes > self.node_cap:
            raise ResourceLimitError(f"Containment search exceeded {self.node_cap} nodes")
        needle = self.needle
        while c <= needle.cols and not self.needle_rows[c]:
            c += 1
        if c > needle.cols:
            if prev_x + (needle.cols - prev_c) <= self.xhi:
                yield dict(found)
            return
        lo_x = prev_x + (c - prev_c)
        hi_x = self.xhi - (needle.cols - c)
        start = bisect.bisect_left(self.cols, lo_x)
        for x in self.cols[start:]:
            if x > hi_x:
                break
            yield from self._rows(c, x, list(self.needle_rows[c]), row_map, found)

    def _rows(
        self, c: int, x: int, pending: list[int], row_map: dict[int, int], found: Occurrence
    ) -> Iterator[Occurrence]:
        if not pending:
            yield from self._columns(c + 1, x, c, row_map, found)
            return
        r = pending[0]
        ys = self.col_rows[x]
        if r in row_map:
            y = row_map[r]
            i = bisect.bisect_left(ys, y)
            if i < len(ys) and ys[i] == y:
                found[(c, r)] = Point(x, y)
                yield from self._rows(c, x, pending[1:], row_map, found)
                del found[(c, r)]
            return
        lo, hi = self._row_bounds(row_map, r)
        for y in ys[bisect.bisect_left(ys, lo) : bisect.bisect_right(ys, hi)]:
            row_map[r] = y
            found[(c, r)] = Point(x, y)
            yield from self._rows(c, x, pending[1:], row_map, found)
            del found[(c, r)]
            del row_map[r]


def iter_occurrences(
    haystack: Haystack,
    needle: PatternMatrix,
    node_cap: int | None = None,
    window: Rect | None = None,
) -> Iterator[Occurrence]:
    """
    Every order-preserving embedding of ``needle``'s ones into ``haystack``.

    Needle columns are matched left to right; each needle row is pinned to a
    haystack row the first time one of its ones is placed, and later ones
    of that row must land on the same haystack row.  Rows are kept in order
    with enough slack for the needle rows still unplaced.  With ``window``
    only haystack points inside that box take part.

    Raises ResourceLimitError once ``node_cap`` search nodes are spent.
    """
    if not needle.ones:
        raise ValueError("Needle must contain at least one 1")
    cap = node_cap if node_cap is not None else gadget_node_cap()
    yield from _Matcher(haystack, needle, cap, window).run()


def contains(
    haystack: Haystack, needle: PatternMatrix, node_cap: int | None = None, window: Rect | None = None
) -> Occurrence | None:
    return next(iter_occurrences(haystack, needle, node_cap, window), None)


def bounding_box(occurrence: Occurrence) -> Rect:
    xs = [p.x for p in occurrence.values()]
    ys = [p.y for p in occurrence.values()]
    return Rect.box(min(xs), max(xs), min(ys), max(ys))


def avoidance_parameter(seq: Sequence[int], k_max: int) -> int:
    """
    Smallest k <= k_max such that ``seq`` avoids some permutation of size k.

    Returns ``k_max + 1`` when every permutation up to k_max is contained.
    """
    keys = tuple(seq)
    if sorted(keys) != list(range(1, len(keys) + 1)):
        raise ValueError("avoidance_parameter expects a permutation")
    for k in range(1, k_max + 1):
        for perm in itertools.permutations(range(1, k + 1)):
            if contains(keys, PatternMatrix.from_permutation(perm)) is None:
                logger.debug("%s avoids %s", keys[:12], perm)
                return k
    return k_max + 1


def longest_decreasing(seq: Sequence[int]) -> int:
    """Patience sorting on negated keys."""
    piles: list[int] = []
    for x in seq:
        i = bisect.bisect_left(piles, -x)
        if i == len(piles):
            piles.append(-x)
        else:
            piles[i] = -x
    return len(piles)


def increasing_cover(seq: Sequence[int]) -> list[tuple[int, ...]]:
    """
    Split ``seq`` into increasing subsequences by repeatedly peeling the keys
    with no smaller key after them.  The number of pieces equals
    ``longest_decreasing(seq)``.
    """
    remaining = list(seq)
    pieces: list[tuple[int, ...]] = []
    while remaining:
        keep = [False] * len(remaining)
        low = None
        for i in range(len(remaining) - 1, -1, -1):
            if low is None or remaining[i] < low:
                keep[i] = True
                low = remaining[i]
        pieces.append(tuple(x for x, k in zip(remaining, keep) if k))
        remaining = [x for x, k in zip(remaining, keep) if not k]
    return pieces
