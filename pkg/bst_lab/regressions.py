"""
regressions.py
~~~~~~~~~~~~~~
Exhaustive searches for small inputs on which a tempting shortcut about
Greedy breaks, and the JSON store that keeps the witnesses around so every
test run re-checks them.

pattern-counter   an input avoiding (3,2,1) whose Greedy touches contain it
decomp-counter    a 2-decomposable input and a deflation of it where the
                  regions Greedy touches differ from Greedy on the skeleton
gadget-counter    a path preorder, an initial tree and an access-free box of
                  the Greedy touches holding every permutation of size s
"""

from __future__ import annotations

import itertools
import logging
from pathlib import Path
from typing import Iterator, Literal

import numpy as np
from pydantic import BaseModel, Field

from bst_lab.decomposition import Block, deflations, is_k_decomposable
from bst_lab.geometry import Rect
from bst_lab.greedy import offending_boxes, run_greedy
from bst_lab.patterns import PatternMatrix, contains, longest_decreasing
from bst_lab.rgreedy import contracted_matrix, region_matrix
from bst_lab.sequences import AccessSequence, enumerate_path_preorders
from bst_lab.settings import output_dir
from bst_lab.trees import InitialTree

logger = logging.getLogger(__name__)

Target = Literal["pattern-counter", "decomp-counter", "gadget-counter"]
TARGETS: tuple[Target, ...] = ("pattern-counter", "decomp-counter", "gadget-counter")

DEFAULT_MAX_N: dict[str, int] = {"pattern-counter": 8, "decomp-counter": 8, "gadget-counter": 7}
DEFAULT_BOX_SIZE = 2

_DESCENDING = PatternMatrix.from_permutation((3, 2, 1))


class WitnessNotFound(RuntimeError):
    """A regression search covered its whole space without a witness."""


class Witness(BaseModel):
    target: Target
    keys: list[int]
    # preorder of the initial tree (gadget-counter)
    initial: list[int] | None = None
    skeleton: list[int] | None = None
    # (start, end, low, high) per deflation block, in time order
    blocks: list[tuple[int, int, int, int]] | None = None
    # (xmin, xmax, ymin, ymax)
    box: tuple[int, int, int, int] | None = None
    size: int | None = None

    def sequence(self) -> AccessSequence:
        return AccessSequence(tuple(self.keys), len(self.keys))

    def initial_tree(self) -> InitialTree | None:
        return InitialTree.from_insertion(self.initial) if self.initial else None


class WitnessStore(BaseModel):
    witnesses: list[Witness] = Field(default_factory=list)

    def get(self, target: Target) -> Witness | None:
        return next((w for w in self.witnesses if w.target == target), None)

    def put(self, witness: Witness) -> None:
        self.witnesses = [w for w in self.witnesses if w.target != witness.target] + [witness]
        self.witnesses.sort(key=lambda w: TARGETS.index(w.target))


# ──────────────────────────────────────────────────────────────────────────────
# Per-target checks: each returns a witness for the candidate or None
# ──────────────────────────────────────────────────────────────────────────────

def _check_pattern(keys: tuple[int, ...]) -> Witness | None:
    if longest_decreasing(keys) >= 3:
        return None
    trace = run_greedy(AccessSequence(keys, len(keys)))
    if contains(trace.touch, _DESCENDING) is None:
        return None
    return Witness(target="pattern-counter", keys=list(keys))


def _block_tuple(block: Block) -> tuple[int, int, int, int]:
    return block.start, block.end, block.low, block.high


def _check_decomp(keys: tuple[int, ...]) -> Witness | None:
    decomposable, _ = is_k_decomposable(keys, 2)
    if not decomposable:
        return None
    touch = run_greedy(AccessSequence(keys, len(keys))).touch
    for skeleton, blocks in deflations(keys):
        if not np.array_equal(region_matrix(touch, blocks), contracted_matrix(skeleton)):
            return Witness(
                target="decomp-counter",
                keys=list(keys),
                skeleton=list(skeleton),
                blocks=[_block_tuple(b) for b in blocks],
            )
    return None


def _permutations_of(size: int) -> list[PatternMatrix]:
    return [PatternMatrix.from_permutation(p) for p in itertools.permutations(range(1, size + 1))]


def _check_gadget(seq: AccessSequence, tree: InitialTree, needles: list[PatternMatrix]) -> Witness | None:
    size = needles[0].cols
    touch = run_greedy(seq, tree).touch
    for box in offending_boxes(seq.keys, seq.n, "capture", min_width=size, min_height=size):
        if all(contains(touch, needle, window=box) is not None for needle in needles):
            return Witness(
                target="gadget-counter",
                keys=list(seq.keys),
                initial=tree.preorder(),
                box=(box.xmin, box.xmax, box.ymin, box.ymax),
                size=size,
            )
    return None


# ──────────────────────────────────────────────────────────────────────────────
# Search
# ──────────────────────────────────────────────────────────────────────────────

def _permutations(first: int, max_n: int) -> Iterator[tuple[int, ...]]:
    for n in range(first, max_n + 1):
        yield from itertools.permutations(range(1, n + 1))


def _gadget_candidates(max_n: int, size: int) -> Iterator[tuple[AccessSequence, InitialTree]]:
    for n in range(size, max_n + 1):
        for seq in enumerate_path_preorders(n):
            for tree in InitialTree.all_shapes(n):
                yield seq, tree


def regression_search(target: Target, max_n: int | None = None, size: int = DEFAULT_BOX_SIZE) -> Witness:
    """
    Run the search for ``target`` over all inputs up to ``max_n`` keys, in
    order of size and then lexicographically.

    Raises WitnessNotFound when the space is exhausted.
    """
    if target not in TARGETS:
        raise ValueError(f"Unknown regression target {target!r}; expected one of {', '.join(TARGETS)}")
    limit = max_n if max_n is not None else DEFAULT_MAX_N[target]
    if size < 1:
        raise ValueError(f"Box pattern size must be positive, got {size}")

    found: Witness | None = None
    checked = 0
    if target == "pattern-counter":
        for perm in _permutations(3, limit):
            checked += 1
            if (found := _check_pattern(perm)) is not None:
                break
    elif target == "decomp-counter":
        for perm in _permutations(3, limit):
            checked += 1
            if (found := _check_decomp(perm)) is not None:
                break
    else:
        needles = _permutations_of(size)
        for seq, tree in _gadget_candidates(limit, size):
            checked += 1
            if (found := _check_gadget(seq, tree, needles)) is not None:
                break

    if found is None:
        raise WitnessNotFound(f"No {target} witness among {checked} candidates up to n={limit}")
    logger.info("%s witness after %d candidates: keys=%s", target, checked, found.keys)
    return found


# ──────────────────────────────────────────────────────────────────────────────
# Verification
# ──────────────────────────────────────────────────────────────────────────────

def _is_path_preorder(keys: list[int]) -> bool:
    lo, hi = 1, len(keys)
    for x in keys:
        if x == lo:
            lo += 1
        elif x == hi:
            hi -= 1
        else:
            return False
    return True


def _verify_decomp(w: Witness) -> bool:
    keys = tuple(w.keys)
    if w.skeleton is None or w.blocks is None:
        return False
    if not is_k_decomposable(keys, 2)[0]:
        return False
    blocks = [Block(*b) for b in w.blocks]
    if not any(sk == tuple(w.skeleton) and bl == blocks for sk, bl in deflations(keys)):
        return False
    touch = run_greedy(w.sequence()).touch
    return not np.array_equal(region_matrix(touch, blocks), contracted_matrix(w.skeleton))


def _verify_gadget(w: Witness) -> bool:
    if w.box is None or w.size is None or w.initial is None:
        return False
    if not _is_path_preorder(w.keys):
        return False
    seq = w.sequence()
    box = Rect.box(*w.box)
    if any(box.xmin <= x <= box.xmax for x in seq.keys[box.ymin - 1 : box.ymax]):
        return False
    touch = run_greedy(seq, w.initial_tree()).touch
    return all(contains(touch, needle, window=box) is not None for needle in _permutations_of(w.size))


def verify_witness(witness: Witness) -> bool:
    """Recompute the phenomenon a stored witness claims."""
    if sorted(witness.keys) != list(range(1, len(witness.keys) + 1)):
        return False
    if witness.target == "pattern-counter":
        ok = _check_pattern(tuple(witness.keys)) is not None
    elif witness.target == "decomp-counter":
        ok = _verify_decomp(witness)
    else:
        ok = _verify_gadget(witness)
    if not ok:
        logger.warning("Stored %s witness %s no longer reproduces", witness.target, witness.keys)
    return ok


# ──────────────────────────────────────────────────────────────────────────────
# Store
# ──────────────────────────────────────────────────────────────────────────────

def default_store_path() -> Path:
    return output_dir() / "regressions.json"


def load_store(path: str | Path) -> WitnessStore:
    p = Path(path)
    if not p.exists():
        return WitnessStore()
    return WitnessStore.model_validate_json(p.read_text())


def save_witness(witness: Witness, path: str | Path) -> Path:
    p = Path(path)
    store = load_store(p)
    store.put(witness)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(store.model_dump_json(indent=2) + "\n")
    logger.info("Stored %s witness in %s", witness.target, p)
    return p


def verify_store(path: str | Path) -> dict[str, bool]:
    store = load_store(path)
    if not store.witnesses:
        raise ValueError(f"No witnesses stored in {path}")
    return {w.target: verify_witness(w) for w in store.witnesses}
