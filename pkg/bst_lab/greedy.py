"""
greedy.py
~~~~~~~~~
The online geometric execution core: the initial-tree stack encoding, stair
computation, Greedy and its one-sided variants, execution traces and the
runtime checks (gadgets, hidden elements, wings) run against those traces.

Rows 1..m are access times.  An initial tree lives in rows <= 0 as one
bottom-aligned stack per key and is never counted in the cost.
"""

from __future__ import annotations

import bisect
import json
import logging
import re
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, Literal, Sequence

import numpy as np

from bst_lab.geometry import NO_TOUCH, PointGrid, Rect, staircase_records
from bst_lab.patterns import PatternMatrix, bounding_box, contains, longest_decreasing
from bst_lab.sequences import AccessSequence
from bst_lab.trees import InitialTree

logger = logging.getLogger(__name__)

Algorithm = Literal["greedy", "greedy-left", "greedy-right", "rgreedy"]
Side = Literal["left", "right"]
GadgetMode = Literal["capture", "increasing", "decreasing", "alternating"]


def encode_initial_tree(tree: InitialTree) -> PointGrid:
    """
    Column x holds rows 1-d .. 1-d(x), d being the tree height.

    Shallower keys stand taller, the root tops out at row 0, and the first
    stair of any key a is exactly its search path.
    """
    d = tree.height
    return PointGrid(
        ((x, y) for x in range(1, tree.n + 1) for y in range(1 - d, 2 - tree.depth(x))),
        width=tree.n,
    )


# ──────────────────────────────────────────────────────────────────────────────
# Stair state
# ──────────────────────────────────────────────────────────────────────────────

class GreedyState:
    """
    Per-column last-touch array τ over keys 1..n.

    Slots 0 and n+1 are padding and stay at NO_TOUCH.  Stairs are read off τ
    with one staircase-maxima sweep on each side of the accessed key.
    """

    def __init__(self, n: int, initial: InitialTree | None = None) -> None:
        if n < 1:
            raise ValueError(f"n must be positive, got {n}")
        self.n = n
        self.tau = np.full(n + 2, NO_TOUCH, dtype=np.int64)
        if initial is not None:
            if initial.n != n:
                raise ValueError(f"Initial tree has {initial.n} keys, the sequence has {n}")
            depths = np.array([initial.depth(x) for x in range(1, n + 1)], dtype=np.int64)
            self.tau[1 : n + 1] = 1 - depths

    @classmethod
    def from_grid(cls, grid: PointGrid, n: int, before: int) -> "GreedyState":
        """State after every point of ``grid`` in rows <= ``before``."""
        state = cls(n)
        for x in grid.columns():
            if 1 <= x <= n:
                y = grid.last_touch(x, before)
                if y is not None:
                    state.tau[x] = y
        return state

    def _check(self, a: int) -> None:
        if not 1 <= a <= self.n:
            raise ValueError(f"Key {a} outside 1..{self.n}")

    def stair_left(self, a: int) -> np.ndarray:
        self._check(a)
        return a - 1 - staircase_records(self.tau, a, self.tau[1:a][::-1])

    def stair_right(self, a: int) -> np.ndarray:
        self._check(a)
        return a + 1 + staircase_records(self.tau, a, self.tau[a + 1 : self.n + 1])

    def stair(self, a: int) -> np.ndarray:
        return np.concatenate((self.stair_left(a)[::-1], [a], self.stair_right(a))).astype(np.int64)

    def touch(self, keys: Iterable[int] | np.ndarray, t: int) -> None:
        idx = np.asarray(keys if isinstance(keys, np.ndarray) else list(keys), dtype=np.int64)
        if idx.size:
            self.tau[idx] = t


# ──────────────────────────────────────────────────────────────────────────────
# Traces
# ──────────────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class ExecutionTrace:
    """
    One execution: the touched keys of every access row.

    ``rows[t-1]`` holds the sorted keys touched at time t; the accessed key
    is always among them.
    """

    sequence: AccessSequence
    initial: InitialTree | None
    rows: tuple[tuple[int, ...], ...]
    algorithm: Algorithm = "greedy"

    def __post_init__(self) -> None:
        if len(self.rows) != self.sequence.m:
            raise ValueError(f"Trace has {len(self.rows)} rows for {self.sequence.m} accesses")
        for t, (x, row) in enumerate(zip(self.sequence.keys, self.rows), start=1):
            if x not in row:
                raise ValueError(f"Access ({x},{t}) is missing from its own row")
        if self.initial is not None and self.initial.n != self.sequence.n:
            raise ValueError("Initial tree and sequence disagree on n")

    @property
    def n(self) -> int:
        return self.sequence.n

    @property
    def m(self) -> int:
        return self.sequence.m

    @property
    def cost(self) -> int:
        return sum(len(r) for r in self.rows)

    @cached_property
    def touch(self) -> PointGrid:
        return PointGrid(((x, t) for t, row in enumerate(self.rows, start=1) for x in row), width=self.n)

    @cached_property
    def stacks(self) -> PointGrid:
        if self.initial is None:
            return PointGrid((), width=self.n)
        return encode_initial_tree(self.initial)

    @cached_property
    def combined(self) -> PointGrid:
        """Touch rows over the initial stacks: the set that must be satisfied."""
        return self.touch.union(self.stacks)

    def touched_at(self, t: int) -> tuple[int, ...]:
        return self.rows[t - 1]


def _run(seq: AccessSequence, initial: InitialTree | None, algorithm: Algorithm) -> ExecutionTrace:
    state = GreedyState(seq.n, initial)
    rows = []
    for t, a in enumerate(seq.keys, start=1):
        if algorithm == "greedy":
            keys = state.stair(a)
        elif algorithm == "greedy-left":
            keys = np.append(state.stair_left(a), a)
        else:
            keys = np.append(state.stair_right(a), a)
        state.touch(keys, t)
        rows.append(tuple(sorted(int(x) for x in keys)))
    return ExecutionTrace(seq, initial, tuple(rows), algorithm)


def run_greedy(seq: AccessSequence, initial: InitialTree | None = None) -> ExecutionTrace:
    trace = _run(seq, initial, "greedy")
    logger.debug("greedy n=%d m=%d cost=%d", seq.n, seq.m, trace.cost)
    return trace


def run_greedy_sided(seq: AccessSequence, initial: InitialTree | None, side: Side) -> ExecutionTrace:
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    return _run(seq, initial, "greedy-left" if side == "left" else "greedy-right")


@dataclass(frozen=True)
class SGreedyResult:
    left: ExecutionTrace
    right: ExecutionTrace

    @cached_property
    def union(self) -> PointGrid:
        return self.left.touch.union(self.right.touch)

    @property
    def cost(self) -> int:
        return len(self.union)


def run_sgreedy(seq: AccessSequence, initial: InitialTree | None = None) -> SGreedyResult:
    return SGreedyResult(run_greedy_sided(seq, initial, "left"), run_greedy_sided(seq, initial, "right"))


def stair_at(grid: PointGrid, n: int, a: int, t: int) -> set[int]:
    """stair_t(a) against the points of ``grid`` strictly below row t."""
    return {int(x) for x in GreedyState.from_grid(grid, n, t - 1).stair(a)}


def stair_by_rectangles(grid: PointGrid, n: int, a: int, t: int) -> set[int]:
    """stair_t(a) straight from the rectangle definition."""
    history = grid.restrict(1, n, min(grid.rows(), default=t), t - 1)
    probe = history.union([(a, t)])
    stair = {a}
    for b in range(1, n + 1):
        tb = history.last_touch(b, t - 1)
        if b == a or tb is None:
            continue
        if probe.count_in(min(a, b), max(a, b), tb, t) == 2:
            stair.add(b)
    return stair


# ──────────────────────────────────────────────────────────────────────────────
# Trace text and JSON formats
# ──────────────────────────────────────────────────────────────────────────────

_HEADER = re.compile(r"(\w+)=(\S+)")
_ROW = re.compile(r"^(\d+)\s+\*(\d+):\s*(.*)$")


def format_trace(trace: ExecutionTrace) -> str:
    initial = trace.initial.format() if trace.initial is not None else "none"
    lines = [f"# trace alg={trace.algorithm} n={trace.n} m={trace.m} initial={initial}"]
    for t, (x, row) in enumerate(zip(trace.sequence.keys, trace.rows), start=1):
        lines.append(f"{t} *{x}: {' '.join(map(str, row))}")
    return "\n".join(lines) + "\n"


def parse_trace(text: str) -> ExecutionTrace:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise ValueError("Trace text must start with a '# trace' header")
    header = dict(_HEADER.findall(lines[0]))
    try:
        n, m = int(header["n"]), int(header["m"])
    except KeyError as exc:
        raise ValueError(f"Trace header lacks {exc}") from exc
    initial = None if header.get("initial", "none") == "none" else InitialTree.parse(header["initial"])
    keys, rows = [], []
    for t, line in enumerate(lines[1:], start=1):
        match = _ROW.match(line.strip())
        if match is None or int(match.group(1)) != t:
            raise ValueError(f"Malformed trace row {t}: {line!r}")
        keys.append(int(match.group(2)))
        rows.append(tuple(int(tok) for tok in match.group(3).split()))
    if len(keys) != m:
        raise ValueError(f"Header announces {m} rows, found {len(keys)}")
    return ExecutionTrace(AccessSequence(tuple(keys), n), initial, tuple(rows), header.get("alg", "greedy"))


def trace_to_json(trace: ExecutionTrace) -> str:
    return json.dumps(
        {
            "algorithm": trace.algorithm,
            "n": trace.n,
            "m": trace.m,
            "initial": trace.initial.preorder() if trace.initial is not None else None,
            "keys": list(trace.sequence.keys),
            "rows": [list(r) for r in trace.rows],
            "cost": trace.cost,
        }
    )


def trace_from_json(text: str) -> ExecutionTrace:
    data = json.loads(text)
    initial = InitialTree.from_insertion(data["initial"]) if data.get("initial") else None
    return ExecutionTrace(
        AccessSequence(tuple(data["keys"]), data["n"]),
        initial,
        tuple(tuple(r) for r in data["rows"]),
        data.get("algorithm", "greedy"),
    )


def write_trace(trace: ExecutionTrace, path: str | Path) -> None:
    Path(path).write_text(format_trace(trace))


def read_trace(path: str | Path) -> ExecutionTrace:
    text = Path(path).read_text()
    return trace_from_json(text) if text.lstrip().startswith("{") else parse_trace(text)


# ──────────────────────────────────────────────────────────────────────────────
# Input-revealing gadgets
# ──────────────────────────────────────────────────────────────────────────────

def _longest_increasing(xs: Sequence[int]) -> int:
    piles: list[int] = []
    for x in xs:
        i = bisect.bisect_left(piles, x)
        if i == len(piles):
            piles.append(x)
        else:
            piles[i] = x
    return len(piles)


def _alternation(xs: Sequence[int], xmin: int, xmax: int) -> int:
    """Longest right/left/right/... alternation around [xmin, xmax], starting right."""
    count, want_right = 0, True
    for x in xs:
        if want_right and x > xmax:
            count, want_right = count + 1, False
        elif not want_right and x < xmin:
            count, want_right = count + 1, True
    return count


def _revealed(keys: Sequence[int], box: tuple[int, int, int, int], mode: GadgetMode, k: int) -> bool:
    """The access-pattern half of the gadget disjunction for an access-free box."""
    xmin, xmax, ymin, ymax = box
    rows = keys[ymin - 1 : ymax]
    if mode == "capture":
        return False
    if mode == "increasing":
        return _longest_increasing([x for x in rows if x < xmin]) >= k
    if mode == "decreasing":
        return longest_decreasing([x for x in rows if x > xmax]) >= k
    return _alternation(rows, xmin, xmax) >= k


def offending_boxes(
    keys: Sequence[int],
    n: int,
    mode: GadgetMode = "capture",
    k: int = 0,
    min_width: int = 1,
    min_height: int = 1,
) -> Iterator[Rect]:
    """
    Access-free boxes for which the mode's access pattern is also missing.

    Only boxes that cannot grow by a row in either direction without meeting
    an access or the access pattern are produced; every offending box lies
    inside one of them.  Columns always span a full gap between accesses.
    """
    m = len(keys)
    for y1 in range(1, m + 1):
        xs: list[int] = []
        for y2 in range(y1, m + 1):
            bisect.insort(xs, keys[y2 - 1])
            if y2 - y1 + 1 < min_height:
                continue
            bounds = [0, *xs, n + 1]
            for lo, hi in zip(bounds, bounds[1:]):
                if hi - lo - 1 < min_width:
                    continue
                box = (lo + 1, hi - 1, y1, y2)
                if _revealed(keys, box, mode, k):
                    continue
                below = y1 > 1 and not lo < keys[y1 - 2] < hi
                if below and not _revealed(keys, (lo + 1, hi - 1, y1 - 1, y2), mode, k):
                    continue
                above = y2 < m and not lo < keys[y2] < hi
                if above and not _revealed(keys, (lo + 1, hi - 1, y1, y2 + 1), mode, k):
                    continue
                yield Rect.box(*box)


def find_gadget_violations(
    trace: ExecutionTrace,
    gadget: PatternMatrix,
    mode: GadgetMode = "capture",
    k: int | None = None,
    node_cap: int | None = None,
) -> list[Rect]:
    """
    Bounding boxes of ``gadget`` in the touch rows that break the gadget rule.

    A box passes when it holds an access point or, for the monotone and
    alternating modes, when k accesses in its rows form the required
    pattern beside it.  One witness box is returned per maximal offending
    region; an empty list means the rule holds on this trace.

    Raises ResourceLimitError when a containment query exceeds ``node_cap``.
    """
    if mode not in ("capture", "increasing", "decreasing", "alternating"):
        raise ValueError(f"Unknown gadget mode {mode!r}")
    if mode != "capture" and (k is None or k < 1):
        raise ValueError(f"Mode {mode!r} needs a positive k")
    touch = trace.touch
    found: set[Rect] = set()
    for region in offending_boxes(
        trace.sequence.keys, trace.n, mode, k or 0, min_width=gadget.cols, min_height=gadget.rows
    ):
        if touch.count_in(region.xmin, region.xmax, region.ymin, region.ymax) < len(gadget.ones):
            continue
        occurrence = contains(touch, gadget, node_cap, window=region)
        if occurrence is not None:
            box = bounding_box(occurrence)
            logger.warning("Gadget %s (%s) occurs in %s without an access point", gadget, mode, box)
            found.add(box)
    return sorted(found, key=lambda r: (r.ymin, r.xmin, r.ymax, r.xmax))


# ──────────────────────────────────────────────────────────────────────────────
# Hidden elements
# ──────────────────────────────────────────────────────────────────────────────

HiddenCase = Literal["left", "right", "both"]


@dataclass(frozen=True)
class HiddenViolation:
    key: int
    after: int
    case: HiddenCase
    lo: int
    hi: int
    touched_at: int


def _ranges(
    algorithm: Algorithm, x: int, w: int | None, y: int | None, n: int
) -> list[tuple[HiddenCase, int, int]]:
    out: list[tuple[HiddenCase, int, int]] = []
    if algorithm == "greedy":
        if w is not None:
            out.append(("left", w + 1, n))
        if y is not None:
            out.append(("right", 1, y - 1))
        if w is not None and y is not None:
            out.append(("both", w + 1, y - 1))
    elif algorithm == "greedy-right" and w is not None:
        out.append(("left", w + 1, x))
    elif algorithm == "greedy-left" and y is not None:
        out.append(("right", x, y - 1))
    return out


def find_hidden_violations(trace: ExecutionTrace) -> list[HiddenViolation]:
    """
    Check the hidden-element rule on every key after every time step.

    A key x with some w < x touched no earlier than x is hidden in (w, n]
    for Greedy and in (w, x] for GreedyRight: until an access lands in that
    range, x is not touched.  Symmetrically for y > x ([1, y) and [x, y))
    and for both sides at once ((w, y), Greedy only).  The nearest such w
    and y give the tightest ranges, so only those are checked.
    """
    if trace.algorithm == "rgreedy":
        raise ValueError("The hidden-element rule is stated for Greedy and its sided variants")
    n, m = trace.n, trace.m
    keys = trace.sequence.keys
    grid = trace.combined
    touched: dict[int, list[int]] = {x: [] for x in range(1, n + 1)}
    for t, row in enumerate(trace.rows, start=1):
        for x in row:
            touched[x].append(t)

    violations = []
    for t in range(0 if trace.initial is not None else 1, m):
        tau = [None] + [grid.last_touch(b, t) for b in range(1, n + 1)]
        for x in range(1, n + 1):
            # never touched yet: only its own access can touch it
            if tau[x] is None:
                continue
            w = next((b for b in range(x - 1, 0, -1) if tau[b] is not None and tau[b] >= tau[x]), None)
            y = next((b for b in range(x + 1, n + 1) if tau[b] is not None and tau[b] >= tau[x]), None)
            for case, lo, hi in _ranges(trace.algorithm, x, w, y, n):
                stop = next((s for s in range(t + 1, m + 1) if lo <= keys[s - 1] <= hi), m + 1)
                early = [s for s in touched[x] if t < s < stop]
                if early:
                    violations.append(HiddenViolation(x, t, case, lo, hi, early[0]))
    if violations:
        logger.warning("%d hidden-element violations in a %s trace", len(violations), trace.algorithm)
    return violations


# ──────────────────────────────────────────────────────────────────────────────
# Wings of preorder inputs
# ──────────────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class WingReport:
    left: dict[int, int]
    right: dict[int, int]
    touches: dict[int, int]
    over_budget: tuple[int, ...]

    @property
    def total(self) -> int:
        return sum(self.left.values()) + sum(self.right.values())

    @property
    def ok(self) -> bool:
        return not self.over_budget and self.total <= 2 * len(self.touches)


def wings(seq: AccessSequence) -> tuple[dict[int, int], dict[int, int]]:
    """
    Sizes of the left and right wings of every key of a preorder sequence.

    L_a is the run right after a of keys below a; R_a the run after L_a of
    keys between a and the smallest earlier key above a.  The left wing is
    the running maxima of L_a, the right wing the running minima of R_a:
    exactly the members forming an empty rectangle with a.
    """
    seq.require_permutation()
    keys = seq.keys
    n = seq.n
    left, right = {}, {}
    seen: list[int] = []
    for i, a in enumerate(keys):
        j = bisect.bisect_right(seen, a)
        r_a = seen[j] if j < len(seen) else n + 1
        bisect.insort(seen, a)
        count, best, p = 0, 0, i + 1
        while p < n and keys[p] < a:
            if keys[p] > best:
                count, best = count + 1, keys[p]
            p += 1
        left[a] = count
        count, best = 0, r_a
        while p < n and a < keys[p] < r_a:
            if keys[p] < best:
                count, best = count + 1, keys[p]
            p += 1
        right[a] = count
    return left, right


def check_wing_accounting(trace: ExecutionTrace) -> WingReport:
    """Per-key Greedy touch counts against |wing_L| + |wing_R| + 2."""
    if trace.algorithm != "greedy" or trace.initial is not None:
        raise ValueError("Wing accounting applies to Greedy without an initial tree")
    left, right = wings(trace.sequence)
    touches = {x: len(trace.touch.column(x)) for x in range(1, trace.n + 1)}
    over = tuple(x for x in touches if touches[x] > left[x] + right[x] + 2)
    return WingReport(left, right, touches, over)
