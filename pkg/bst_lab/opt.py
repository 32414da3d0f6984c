"""
opt.py
~~~~~~
Exact OPT for tiny inputs, the decomposition lower bound on OPT, the
split/merge transforms for sequences with repeated keys, and the random
hardness survey.

The exact search works on the input grid (accessed keys x access times).
It deepens the number of added points one at a time and, at every node,
repairs the first unsatisfied rectangle by branching on the cells of the
two sides that meet its later corner: in any satisfied superset the point
of that rectangle nearest to the later corner lies on one of them.
"""

from __future__ import annotations

import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from pydantic import BaseModel

from bst_lab.decomposition import DecompositionTree
from bst_lab.geometry import PointGrid, is_satisfied_set
from bst_lab.greedy import run_greedy, run_sgreedy
from bst_lab.sequences import AccessSequence, gen_random_permutation
from bst_lab.settings import ResourceLimitError, node_cap, time_cap_ms

logger = logging.getLogger(__name__)


class OptResult(BaseModel):
    cost: int
    points: list[tuple[int, int]]
    nodes: int = 0
    depth: int = 0
    exact: bool = True

    def witness(self) -> PointGrid:
        return PointGrid(self.points)


class OptSearchLimitError(ResourceLimitError):
    """The exact search ran out of budget; ``best`` is the Greedy upper bound."""

    def __init__(self, message: str, best: OptResult) -> None:
        super().__init__(message)
        self.best = best


@dataclass
class OptLimits:
    node_cap: int = field(default_factory=node_cap)
    time_cap_ms: int | None = field(default_factory=time_cap_ms)
    max_n: int = 8


class _Budget(Exception):
    pass


class _Search:
    def __init__(self, seq: AccessSequence, limits: OptLimits, boundary_only: bool) -> None:
        self.cols = sorted(set(seq.keys))
        index = {x: c for c, x in enumerate(self.cols)}
        self.w, self.m = len(self.cols), seq.m
        # filled[c][y] for compressed column c and row y (row 0 unused)
        self.filled = [[False] * (self.m + 1) for _ in range(self.w)]
        for t, x in enumerate(seq.keys, start=1):
            self.filled[index[x]][t] = True
        self.limits = limits
        self.boundary_only = boundary_only
        self.nodes = 0
        self.deadline = (
            time.monotonic() + limits.time_cap_ms / 1000.0 if limits.time_cap_ms is not None else None
        )

    def first_unsatisfied(self) -> tuple[int, int, int, int] | None:
        """(b, yb, a, y): the earlier and later corner, same order as the numpy verifier."""
        tau = [0] * self.w
        for y in range(1, self.m + 1):
            row = [c for c in range(self.w) if self.filled[c][y]]
            for k, a in enumerate(row):
                prev = row[k - 1] if k else -1
                nxt = row[k + 1] if k + 1 < len(row) else self.w
                best = None
                for scan in (range(a - 1, prev, -1), range(a + 1, nxt)):
                    high = tau[a]
                    for c in scan:
                        if tau[c] > high:
                            high = tau[c]
                            if best is None or (high, c) < best:
                                best = (high, c)
                if best is not None:
                    return best[1], best[0], a, y
            for c in row:
                tau[c] = y
        return None

    def candidates(self, b: int, yb: int, a: int, y: int) -> list[tuple[int, int]]:
        lo, hi = min(a, b), max(a, b)
        if self.boundary_only:
            row = [(c, y) for c in range(lo, hi + 1) if c != a]
            col = [(a, r) for r in range(yb, y)]
            cells = row + col
        else:
            cells = [
                (c, r)
                for r in range(yb, y + 1)
                for c in range(lo, hi + 1)
                if (c, r) not in ((a, y), (b, yb))
            ]
        return [(c, r) for c, r in cells if not self.filled[c][r]]

    def dfs(self, budget: int) -> bool:
        self.nodes += 1
        if self.nodes > self.limits.node_cap:
            raise _Budget(f"node cap {self.limits.node_cap}")
        if self.deadline is not None and self.nodes % 1024 == 0 and time.monotonic() > self.deadline:
            raise _Budget(f"time cap {self.limits.time_cap_ms} ms")
        rect = self.first_unsatisfied()
        if rect is None:
            return True
        if budget == 0:
            return False
        for c, r in self.candidates(*rect):
            self.filled[c][r] = True
            if self.dfs(budget - 1):
                return True
            self.filled[c][r] = False
        return False

    def points(self) -> list[tuple[int, int]]:
        return sorted(
            ((self.cols[c], y) for c in range(self.w) for y in range(1, self.m + 1) if self.filled[c][y]),
            key=lambda p: (p[1], p[0]),
        )


def brute_force_opt(
    seq: AccessSequence, limits: OptLimits | None = None, boundary_only: bool = True
) -> OptResult:
    """
    Minimum satisfied superset of the access points, by iterative deepening.

    Raises OptSearchLimitError, carrying the Greedy cost as an inexact upper
    bound, when the node or time cap is hit.
    """
    limits = limits or OptLimits()
    if len(set(seq.keys)) > limits.max_n:
        raise ValueError(f"{len(set(seq.keys))} distinct keys exceed the exact-search limit {limits.max_n}")
    if seq.m == 0:
        return OptResult(cost=0, points=[])
    greedy = run_greedy(seq)
    upper = greedy.cost - seq.m
    search = _Search(seq, limits, boundary_only)
    try:
        for depth in range(upper + 1):
            if search.dfs(depth):
                points = search.points()
                logger.debug("OPT n=%d m=%d cost=%d nodes=%d", seq.n, seq.m, len(points), search.nodes)
                return OptResult(cost=len(points), points=points, nodes=search.nodes, depth=depth)
            logger.debug("OPT depth %d exhausted after %d nodes", depth, search.nodes)
    except _Budget as exc:
        best = OptResult(
            cost=greedy.cost,
            points=[(p.x, p.y) for p in greedy.touch],
            nodes=search.nodes,
            depth=depth,
            exact=False,
        )
        logger.warning("OPT search stopped at depth %d (%s); Greedy bound %d", depth, exc, greedy.cost)
        raise OptSearchLimitError(f"OPT search exceeded its {exc}", best) from exc
    # the Greedy trace is itself a solution at depth ``upper``
    raise AssertionError("Iterative deepening missed the Greedy solution")


# ──────────────────────────────────────────────────────────────────────────────
# Decomposition lower bound
# ──────────────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class LowerBoundCheck:
    opt_whole: int
    block_sum: int
    n: int

    @property
    def rhs(self) -> int:
        return self.block_sum - 2 * self.n

    @property
    def holds(self) -> bool:
        return self.opt_whole >= self.rhs


def decomposition_lower_bound_check(
    seq: AccessSequence, tree: DecompositionTree, limits: OptLimits | None = None
) -> LowerBoundCheck:
    """OPT of the whole input against the OPT of every skeleton and leaf, minus 2n."""
    seq.require_permutation()
    if tree.sequence != seq.keys:
        raise ValueError("Decomposition tree belongs to a different sequence")
    cache: dict[tuple[int, ...], int] = {}

    def opt_of(perm: tuple[int, ...]) -> int:
        if perm not in cache:
            cache[perm] = brute_force_opt(AccessSequence(perm, len(perm)), limits).cost
        return cache[perm]

    whole = opt_of(seq.keys)
    parts = sum(opt_of(nd.pattern) for nd in tree.nodes())
    check = LowerBoundCheck(whole, parts, seq.n)
    if not check.holds:
        logger.warning("OPT lower bound fails for %s: %d < %d", seq.keys, whole, check.rhs)
    return check


# ──────────────────────────────────────────────────────────────────────────────
# Split and merge
# ──────────────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class SplitSequence:
    sequence: AccessSequence
    # column_map[c - 1] is the original key of split column c
    column_map: tuple[int, ...]
    n: int


def split_sequence(seq: AccessSequence) -> SplitSequence:
    """
    Give every access its own column.

    The accesses of key x take consecutive columns in time order, placed
    after the columns of all smaller keys; the result is a permutation of
    size m read in time order.
    """
    order = sorted(range(seq.m), key=lambda t: (seq.keys[t], t))
    column = [0] * seq.m
    for c, t in enumerate(order, start=1):
        column[t] = c
    column_map = tuple(seq.keys[t] for t in order)
    return SplitSequence(AccessSequence(tuple(column), max(seq.m, 1)), column_map, seq.n)


def merge_grid(grid: PointGrid, column_map: Sequence[int], n: int | None = None) -> PointGrid:
    missing = [x for x in grid.columns() if not 1 <= x <= len(column_map)]
    if missing:
        raise ValueError(f"Columns {missing[:5]} have no entry in the column map")
    return PointGrid(((column_map[p.x - 1], p.y) for p in grid), width=n)


def merge_sequence(split: SplitSequence) -> AccessSequence:
    return AccessSequence(tuple(split.column_map[c - 1] for c in split.sequence.keys), split.n)


def split_satisfied_construction(seq: AccessSequence, satisfied: PointGrid) -> PointGrid:
    """
    Turn a satisfied superset of ``seq`` into one of its split.

    A key accessed m_i > 1 times, whose column holds p_i points, becomes m_i
    columns: the first and last copy every row of the original column, and
    each middle column j holds its own access and a point on the row of
    access j+1.  The result has at most 2|Y| + 2m points.
    """
    if not is_satisfied_set(satisfied):
        raise ValueError("The given point set is not satisfied")
    access = seq.access_grid()
    if not access.points <= satisfied.points:
        raise ValueError("The given point set does not contain every access point")
    stray = set(satisfied.columns()) - set(seq.keys)
    if stray:
        raise ValueError(f"Columns {sorted(stray)[:5]} are touched but never accessed")
    split = split_sequence(seq)
    times: dict[int, list[int]] = {}
    for t, x in enumerate(seq.keys, start=1):
        times.setdefault(x, []).append(t)
    base, acc = {}, 1
    for x in sorted(times):
        base[x] = acc
        acc += len(times[x])

    pts: list[tuple[int, int]] = []
    for x, rows in times.items():
        column = satisfied.column(x)
        first, last = base[x], base[x] + len(rows) - 1
        pts += [(first, y) for y in column]
        if last == first:
            continue
        pts += [(last, y) for y in column]
        for j in range(1, len(rows) - 1):
            pts += [(first + j, rows[j]), (first + j, rows[j + 1])]
    out = PointGrid(pts, width=split.sequence.n)
    logger.debug("split construction: |Y|=%d -> |S'|=%d (m=%d)", len(satisfied), len(out), seq.m)
    return out


# ──────────────────────────────────────────────────────────────────────────────
# Hardness survey
# ──────────────────────────────────────────────────────────────────────────────

SurveyMode = Literal["exact", "sgreedy"]


class SurveySummary(BaseModel):
    n: int
    mode: SurveyMode
    samples: int
    values: list[float]
    mean: float
    std: float
    ci_low: float
    ci_high: float
    minimum: float
    maximum: float


def hardness_survey(
    n: int,
    samples: int = 100,
    seed: int = 1,
    mode: SurveyMode | None = None,
    limits: OptLimits | None = None,
) -> SurveySummary:
    """
    Distribution of OPT over permutations of size n (``exact``), or of the
    SGreedy union cost divided by n log2 n over random permutations
    (``sgreedy``).  Exact mode enumerates S_n when n! <= samples.
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    mode = mode or ("exact" if n <= 6 else "sgreedy")
    if mode == "exact":
        if math.factorial(n) <= samples:
            inputs = [AccessSequence(p, n) for p in itertools.permutations(range(1, n + 1))]
        else:
            inputs = [gen_random_permutation(n, seed + i) for i in range(samples)]
        values = [float(brute_force_opt(x, limits).cost) for x in inputs]
    else:
        if n < 2:
            raise ValueError("The SGreedy ratio needs n >= 2")
        scale = n * math.log2(n)
        values = [run_sgreedy(gen_random_permutation(n, seed + i)).cost / scale for i in range(samples)]
    arr = np.asarray(values, dtype=float)
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    half = 1.96 * std / math.sqrt(arr.size) if arr.size else 0.0
    mean = float(arr.mean())
    logger.info("hardness n=%d mode=%s samples=%d mean=%.4f", n, mode, arr.size, mean)
    return SurveySummary(
        n=n,
        mode=mode,
        samples=int(arr.size),
        values=values,
        mean=mean,
        std=std,
        ci_low=mean - half,
        ci_high=mean + half,
        minimum=float(arr.min()),
        maximum=float(arr.max()),
    )
