"""
geometry.py
~~~~~~~~~~~
Point-set primitives for the geometric view of BST executions: lattice
points on key columns x time rows, closed rectangles, and the satisfaction
verifier every algorithm output is checked against.

Rows may be non-positive; the initial-tree stacks live there.
"""

from __future__ import annotations

import bisect
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple

import numpy as np

logger = logging.getLogger(__name__)

# Sentinel for "column has no point yet" in the vectorised sweeps.
NO_TOUCH = np.iinfo(np.int64).min


class Point(NamedTuple):
    x: int
    y: int


@dataclass(frozen=True)
class Rect:
    """Closed axis-aligned rectangle spanned by two corner points."""

    p: Point
    q: Point

    @classmethod
    def box(cls, xmin: int, xmax: int, ymin: int, ymax: int) -> "Rect":
        if xmin > xmax or ymin > ymax:
            raise ValueError(f"Empty box [{xmin},{xmax}]x[{ymin},{ymax}]")
        return cls(Point(xmin, ymin), Point(xmax, ymax))

    @property
    def xmin(self) -> int:
        return min(self.p.x, self.q.x)

    @property
    def xmax(self) -> int:
        return max(self.p.x, self.q.x)

    @property
    def ymin(self) -> int:
        return min(self.p.y, self.q.y)

    @property
    def ymax(self) -> int:
        return max(self.p.y, self.q.y)

    @property
    def is_degenerate(self) -> bool:
        return self.p.x == self.q.x or self.p.y == self.q.y

    def contains(self, pt: Point) -> bool:
        return self.xmin <= pt.x <= self.xmax and self.ymin <= pt.y <= self.ymax


class PointGrid:
    """
    Immutable set of lattice points, indexed by row and by column.

    Parameters
    ----------
    points   Any iterable of ``(x, y)`` pairs; duplicates collapse.
    width    Number of columns.  Defaults to the largest x present.
    """

    __slots__ = ("_points", "_cols", "_rows", "_col_keys", "width")

    def __init__(self, points: Iterable[tuple[int, int]] = (), width: int | None = None) -> None:
        pts = frozenset(Point(int(x), int(y)) for x, y in points)
        cols: dict[int, list[int]] = {}
        rows: dict[int, list[int]] = {}
        for x, y in pts:
            cols.setdefault(x, []).append(y)
            rows.setdefault(y, []).append(x)
        self._points = pts
        self._cols = {x: tuple(sorted(ys)) for x, ys in cols.items()}
        self._rows = {y: tuple(sorted(xs)) for y, xs in rows.items()}
        self._col_keys = tuple(sorted(self._cols))
        self.width = width if width is not None else (self._col_keys[-1] if self._col_keys else 0)

    # ── set protocol ──────────────────────────────────────────────────────────

    def __len__(self) -> int:
        return len(self._points)

    def __contains__(self, pt: object) -> bool:
        return pt in self._points

    def __iter__(self) -> Iterator[Point]:
        return iter(sorted(self._points, key=lambda p: (p.y, p.x)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PointGrid):
            return NotImplemented
        return self._points == other._points

    def __hash__(self) -> int:
        return hash(self._points)

    def __repr__(self) -> str:
        return f"PointGrid({len(self)} points, width={self.width})"

    @property
    def points(self) -> frozenset[Point]:
        return self._points

    # ── queries ───────────────────────────────────────────────────────────────

    def rows(self) -> list[int]:
        return sorted(self._rows)

    def columns(self) -> tuple[int, ...]:
        return self._col_keys

    def row(self, y: int) -> tuple[int, ...]:
        return self._rows.get(y, ())

    def column(self, x: int) -> tuple[int, ...]:
        return self._cols.get(x, ())

    @property
    def height(self) -> int:
        return max(self._rows) if self._rows else 0

    def last_touch(self, b: int, t: int) -> int | None:
        """τ(b, t): the highest row ≤ t holding a point in column b."""
        ys = self._cols.get(b)
        if not ys:
            return None
        i = bisect.bisect_right(ys, t)
        return ys[i - 1] if i else None

    def count_in(self, xmin: int, xmax: int, ymin: int, ymax: int) -> int:
        lo = bisect.bisect_left(self._col_keys, xmin)
        hi = bisect.bisect_right(self._col_keys, xmax)
        total = 0
        for x in self._col_keys[lo:hi]:
            ys = self._cols[x]
            total += bisect.bisect_right(ys, ymax) - bisect.bisect_left(ys, ymin)
        return total

    def restrict(self, xmin: int, xmax: int, ymin: int, ymax: int) -> "PointGrid":
        return PointGrid(
            (p for p in self._points if xmin <= p.x <= xmax and ymin <= p.y <= ymax),
            width=self.width,
        )

    def union(self, other: Iterable[tuple[int, int]]) -> "PointGrid":
        if isinstance(other, PointGrid):
            return PointGrid(self._points | other._points, width=max(self.width, other.width))
        grid = PointGrid(self._points.union(Point(*p) for p in other))
        return PointGrid(grid.points, width=max(self.width, grid.width))


def weight(grid: PointGrid) -> int:
    return len(grid)


# ──────────────────────────────────────────────────────────────────────────────
# Satisfaction
# ──────────────────────────────────────────────────────────────────────────────

def is_rect_satisfied(grid: PointGrid, r: Rect) -> bool:
    if r.p not in grid or r.q not in grid:
        raise ValueError(f"Rectangle corners {r.p} and {r.q} must both be points of the grid")
    if r.is_degenerate:
        return True
    return grid.count_in(r.xmin, r.xmax, r.ymin, r.ymax) > 2


def staircase_records(tau: np.ndarray, start: int, gap: np.ndarray) -> np.ndarray:
    """
    Positions in ``gap`` whose value beats ``tau[start]`` and every value
    between them and ``start``.  ``gap`` is read outward from ``start``.
    """
    if gap.size == 0:
        return gap.astype(np.int64)
    running = np.maximum.accumulate(np.concatenate(([tau[start]], gap)))[:-1]
    return np.nonzero(gap > running)[0]


def first_unsatisfied(grid: PointGrid) -> Rect | None:
    """
    Return the first unsatisfied rectangle of ``grid`` or ``None``.

    Rows are swept bottom to top while a per-column last-touch array is
    maintained.  A point (a, y) forms an empty rectangle exactly with the
    staircase maxima of that array between a and the nearest other point
    of row y on each side.

    The witness minimises (later.y, later.x, earlier.y, earlier.x) compared
    lexicographically: the later corner least by (y, x) first, and among
    pairs sharing it, the earlier corner least by (y, x).  The returned
    rectangle has the earlier corner as ``p`` and the later one as ``q``.
    """
    cols = grid.columns()
    if not cols:
        return None
    index = {x: i for i, x in enumerate(cols)}
    tau = np.full(len(cols), NO_TOUCH, dtype=np.int64)

    for y in grid.rows():
        idx = [index[x] for x in grid.row(y)]
        for k, a in enumerate(idx):
            prev = idx[k - 1] if k > 0 else -1
            nxt = idx[k + 1] if k + 1 < len(idx) else len(cols)
            left = tau[prev + 1 : a][::-1]
            right = tau[a + 1 : nxt]
            hits = [a - 1 - int(h) for h in staircase_records(tau, a, left)]
            hits += [a + 1 + int(h) for h in staircase_records(tau, a, right)]
            if hits:
                b = min(hits, key=lambda c: (int(tau[c]), c))
                return Rect(Point(cols[b], int(tau[b])), Point(cols[a], y))
        tau[idx] = y
    return None


def is_satisfied_set(grid: PointGrid) -> bool:
    return first_unsatisfied(grid) is None


# ──────────────────────────────────────────────────────────────────────────────
# Text format: "w h" header then one "x y" pair per line
# ──────────────────────────────────────────────────────────────────────────────

def format_grid(grid: PointGrid) -> str:
    lines = [f"{grid.width} {grid.height}"]
    lines += [f"{p.x} {p.y}" for p in grid]
    return "\n".join(lines) + "\n"


def parse_grid(text: str) -> PointGrid:
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not rows or len(rows[0]) != 2:
        raise ValueError("Grid text must start with a 'w h' header")
    width = int(rows[0][0])
    pts = []
    for fields in rows[1:]:
        if len(fields) != 2:
            raise ValueError(f"Malformed grid line: {' '.join(fields)!r}")
        pts.append((int(fields[0]), int(fields[1])))
    return PointGrid(pts, width=width)


def write_grid(grid: PointGrid, path: str | Path) -> None:
    Path(path).write_text(format_grid(grid))


def read_grid(path: str | Path) -> PointGrid:
    return parse_grid(Path(path).read_text())
