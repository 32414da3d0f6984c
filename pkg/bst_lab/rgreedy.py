"""
rgreedy.py
~~~~~~~~~~
The offline robust Greedy.  Every access first touches its Greedy stair;
then, for each decomposition-tree block that ends at this time, the topwings
of the regions aligned with that block are projected onto the current row.

Regions of an internal node are indexed (i, j): columns of its i-th child
by value, rows of its j-th child by time.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from bst_lab.decomposition import Block, DecompNode, DecompositionTree
from bst_lab.geometry import NO_TOUCH, Point, PointGrid, Rect
from bst_lab.greedy import ExecutionTrace, GreedyState, run_greedy
from bst_lab.sequences import AccessSequence
from bst_lab.trees import InitialTree

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Region:
    i: int
    j: int
    rect: Rect


def regions(blocks: Sequence[Block]) -> list[Region]:
    """The k x k regions of a deflation whose child blocks are given in time order."""
    by_value = sorted(blocks, key=lambda b: b.low)
    return [
        Region(i, j, Rect.box(col.low, col.high, row.start, row.end))
        for i, col in enumerate(by_value, start=1)
        for j, row in enumerate(blocks, start=1)
    ]


def _wing_mask(tops: np.ndarray) -> np.ndarray:
    """Columns whose top point sees the top-left or top-right corner, plus the two edges."""
    present = tops != NO_TOUCH
    if tops.size == 0:
        return present
    before = np.maximum.accumulate(np.concatenate(([NO_TOUCH], tops[:-1])))
    after = np.maximum.accumulate(np.concatenate(([NO_TOUCH], tops[::-1][:-1])))[::-1]
    edge = np.zeros(tops.size, dtype=bool)
    edge[[0, -1]] = True
    return present & ((tops > before) | (tops > after) | edge)


def topwing(grid: PointGrid, region: Rect) -> list[Point]:
    """
    The topmost point of each column of ``region`` that forms an empty
    rectangle with the region's top-left or top-right corner, together with
    the topmost points of its two edge columns.
    """
    tops = np.full(region.xmax - region.xmin + 1, NO_TOUCH, dtype=np.int64)
    for x in range(region.xmin, region.xmax + 1):
        y = grid.last_touch(x, region.ymax)
        if y is not None and y >= region.ymin:
            tops[x - region.xmin] = y
    mask = _wing_mask(tops)
    return [Point(region.xmin + int(c), int(tops[c])) for c in np.nonzero(mask)[0]]


def _topwing_columns(state: GreedyState, low: int, high: int, start: int) -> np.ndarray:
    tops = state.tau[low : high + 1].copy()
    tops[tops < start] = NO_TOUCH
    return low + np.nonzero(_wing_mask(tops))[0]


def _ending_chains(tree: DecompositionTree) -> dict[int, list[DecompNode]]:
    """For each time t: the nodes whose blocks end at t, leaf first, then the parent above them."""
    parents = tree.parents()
    chains = {}
    for leaf in tree.leaves():
        t = leaf.block.end
        chain, node = [], leaf
        while node is not None and node.block.end == t:
            chain.append(node)
            node = parents.get(id(node))
        if node is not None:
            chain.append(node)
        chains[t] = chain
    return chains


def run_rgreedy(
    seq: AccessSequence, tree: DecompositionTree, initial: InitialTree | None = None
) -> ExecutionTrace:
    """
    Run the offline robust Greedy along ``tree``.

    At time t, let v_1 (a leaf), v_2, ..., v_l be the nodes whose blocks end
    at t and v_(l+1) the parent of v_l when there is one.  For h = 2..l+1 in
    order, with v_(h-1) the child of v_h holding the access, the topwing of
    every region aligned with v_(h-1) is projected onto row t.
    """
    if initial is not None:
        raise ValueError("RGreedy runs without an initial tree")
    seq.require_permutation()
    if tree.sequence != seq.keys:
        raise ValueError("Decomposition tree belongs to a different sequence")
    tree.validate()

    chains = _ending_chains(tree)
    state = GreedyState(seq.n)
    rows = []
    extra = 0
    for t, a in enumerate(seq.keys, start=1):
        touched = set(int(x) for x in state.stair(a))
        state.touch(sorted(touched), t)
        chain = chains.get(t, [])
        for below, node in zip(chain, chain[1:]):
            start = below.block.start
            for sibling in node.children:
                wing = _topwing_columns(state, sibling.block.low, sibling.block.high, start)
                state.touch(wing, t)
                extra += sum(1 for x in wing if int(x) not in touched)
                touched.update(int(x) for x in wing)
        rows.append(tuple(sorted(touched)))
    trace = ExecutionTrace(seq, None, tuple(rows), "rgreedy")
    logger.debug("rgreedy n=%d cost=%d augmentation=%d", seq.n, trace.cost, extra)
    return trace


# ──────────────────────────────────────────────────────────────────────────────
# Decomposition bound and region correspondence
# ──────────────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class DecompositionBound:
    lhs: int
    rhs: int
    skeleton_cost: int
    leaf_cost: int
    trace: ExecutionTrace

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs


def _greedy_cost(perm: tuple[int, ...], cache: dict[tuple[int, ...], int]) -> int:
    if perm not in cache:
        cache[perm] = run_greedy(AccessSequence(perm, len(perm))).cost
    return cache[perm]


def decomposition_bound(seq: AccessSequence, tree: DecompositionTree) -> DecompositionBound:
    """RGreedy cost against 4 * sum Greedy(skeletons) + sum Greedy(leaves) + 3n."""
    trace = run_rgreedy(seq, tree)
    cache: dict[tuple[int, ...], int] = {}
    skeletons = sum(_greedy_cost(nd.pattern, cache) for nd in tree.internal_nodes())
    leaves = sum(_greedy_cost(nd.pattern, cache) for nd in tree.leaves())
    rhs = 4 * skeletons + leaves + 3 * seq.n
    if trace.cost > rhs:
        logger.warning("Decomposition bound fails: %d > %d (n=%d)", trace.cost, rhs, seq.n)
    return DecompositionBound(trace.cost, rhs, skeletons, leaves, trace)


def region_matrix(grid: PointGrid, blocks: Sequence[Block]) -> np.ndarray:
    """``out[i-1, j-1]`` is True when region (i, j) holds a point of ``grid``."""
    k = len(blocks)
    out = np.zeros((k, k), dtype=bool)
    for region in regions(blocks):
        r = region.rect
        out[region.i - 1, region.j - 1] = grid.count_in(r.xmin, r.xmax, r.ymin, r.ymax) > 0
    return out


def contracted_matrix(skeleton: Sequence[int]) -> np.ndarray:
    """Touch indicator of Greedy on the skeleton itself, indexed like region_matrix."""
    k = len(skeleton)
    trace = run_greedy(AccessSequence(tuple(skeleton), k))
    out = np.zeros((k, k), dtype=bool)
    for t, row in enumerate(trace.rows, start=1):
        for x in row:
            out[x - 1, t - 1] = True
    return out


def node_blocks(node: DecompNode) -> list[Block]:
    return [c.block for c in node.children]
