"""
sequences.py
~~~~~~~~~~~~
The access-sequence type, its file formats, and seeded generators for the
input classes the lab studies: preorders, sequential and k-increasing
inputs, k-decomposable inputs with their trees, perturbed grids, path
preorders and uniform random permutations.

Every generator is a pure function of its parameters and seed.
"""

from __future__ import annotations

import itertools
import json
import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from bst_lab.decomposition import DecompositionTree, TreeSpec, build_tree
from bst_lab.geometry import PointGrid
from bst_lab.patterns import alternating_permutation, contains, PatternMatrix
from bst_lab.settings import ResourceLimitError
from bst_lab.trees import InitialTree

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AccessSequence:
    keys: tuple[int, ...]
    n: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"Key universe must be non-empty, got n={self.n}")
        bad = [x for x in self.keys if not 1 <= x <= self.n]
        if bad:
            raise ValueError(f"Keys {bad[:5]} fall outside 1..{self.n}")

    @classmethod
    def of(cls, keys: Sequence[int], n: int | None = None) -> "AccessSequence":
        keys = tuple(int(x) for x in keys)
        if not keys and n is None:
            raise ValueError("An empty sequence needs an explicit n")
        return cls(keys, n if n is not None else max(keys))

    def __len__(self) -> int:
        return len(self.keys)

    def __iter__(self) -> Iterator[int]:
        return iter(self.keys)

    def __getitem__(self, t: int) -> int:
        return self.keys[t]

    @property
    def m(self) -> int:
        return len(self.keys)

    @cached_property
    def is_permutation(self) -> bool:
        return self.m == self.n and len(set(self.keys)) == self.n

    def access_grid(self) -> PointGrid:
        """Access points (x_t, t) with t counted from 1."""
        return PointGrid(((x, t) for t, x in enumerate(self.keys, start=1)), width=self.n)

    def require_permutation(self) -> None:
        if not self.is_permutation:
            raise ValueError(f"Expected a permutation of 1..{self.n}, got {self.keys[:12]}")


def reverse(seq: AccessSequence) -> AccessSequence:
    return AccessSequence(seq.keys[::-1], seq.n)


def complement(seq: AccessSequence) -> AccessSequence:
    return AccessSequence(tuple(seq.n + 1 - x for x in seq.keys), seq.n)


def _rng(seed: int | None) -> np.random.Generator:
    return np.random.default_rng(seed)


# ──────────────────────────────────────────────────────────────────────────────
# Generators
# ──────────────────────────────────────────────────────────────────────────────

def gen_preorder(n: int, seed: int | None = None) -> AccessSequence:
    if n < 1:
        raise ValueError(f"Preorder sequences need n >= 1, got {n}")
    tree = InitialTree.random(n, _rng(seed))
    return AccessSequence(tuple(tree.preorder()), n)


def gen_sequential(n: int) -> AccessSequence:
    return AccessSequence(tuple(range(1, n + 1)), n)


def gen_k_increasing(n: int, k: int, seed: int | None = None) -> AccessSequence:
    """Random interleaving of k-1 increasing runs that partition 1..n."""
    if k < 2:
        raise ValueError(f"k-increasing inputs need k >= 2, got {k}")
    if k > n:
        raise ValueError(f"k={k} exceeds n={n}")
    rng = _rng(seed)
    labels = rng.integers(0, k - 1, size=n)
    queues: list[list[int]] = [[] for _ in range(k - 1)]
    for value, label in enumerate(labels, start=1):
        queues[label].append(value)
    heads = [0] * (k - 1)
    keys = []
    for label in rng.permutation(labels):
        keys.append(queues[label][heads[label]])
        heads[label] += 1
    return AccessSequence(tuple(keys), n)


def _random_spec(size: int, k: int, rng: np.random.Generator) -> TreeSpec:
    if size == 1:
        return (1,)
    arity = int(rng.integers(2, min(k, size) + 1))
    skeleton = tuple(int(v) + 1 for v in rng.permutation(arity))
    base, extra = divmod(size, arity)
    sizes = [base + (1 if i < extra else 0) for i in range(arity)]
    rng.shuffle(sizes)
    return (skeleton, [_random_spec(s, k, rng) for s in sizes])


def gen_k_decomposable(
    n: int, k: int, seed: int | None = None
) -> tuple[AccessSequence, DecompositionTree]:
    if k < 2:
        raise ValueError(f"k-decomposable inputs need k >= 2, got {k}")
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    tree = build_tree(_random_spec(n, k, _rng(seed)))
    return AccessSequence(tree.sequence, n), tree


def gen_uniform_decomposable(
    template: Sequence[int], depth: int
) -> tuple[AccessSequence, DecompositionTree]:
    """Complete tree of the given depth; every internal node carries ``template``."""
    template = tuple(template)
    if len(template) < 2 or sorted(template) != list(range(1, len(template) + 1)):
        raise ValueError(f"Template must be a permutation of size >= 2, got {template}")
    if depth < 0:
        raise ValueError(f"Depth must be non-negative, got {depth}")

    def spec(level: int) -> TreeSpec:
        if level == 0:
            return (1,)
        return (template, [spec(level - 1) for _ in template])

    tree = build_tree(spec(depth))
    return AccessSequence(tree.sequence, len(tree.sequence)), tree


def gen_perturbed_grid(side: int) -> AccessSequence:
    """
    Tilted side x side grid: point (i, j) sits at (i*side + j-1, j*side + i-1).

    Both axes are rank-compressed; the permutation is read in time order.
    """
    if side < 1:
        raise ValueError(f"Grid side must be positive, got {side}")
    pts = [
        (i * side + (j - 1), j * side + i - 1)
        for i in range(1, side + 1)
        for j in range(1, side + 1)
    ]
    xs = np.array([p[0] for p in pts])
    ys = np.array([p[1] for p in pts])
    if len(set(xs.tolist())) != len(pts) or len(set(ys.tolist())) != len(pts):
        raise ValueError(f"Perturbed grid of side {side} has colliding coordinates")
    xrank = np.argsort(np.argsort(xs)) + 1
    keys = xrank[np.argsort(ys)]
    return AccessSequence(tuple(int(x) for x in keys), len(pts))


def gen_cole_showcase(n: int, seed: int | None = None) -> tuple[AccessSequence, DecompositionTree]:
    """Random skeleton of size n/b over sequential leaves (1..b), b = floor(log2 n)."""
    b = n.bit_length() - 1 if n > 0 else 0
    if b < 1 or n % b:
        raise ValueError(f"floor(log2 n) must divide n, got n={n}")
    rng = _rng(seed)
    skeleton = tuple(int(v) + 1 for v in rng.permutation(n // b))
    leaf = tuple(range(1, b + 1))
    tree = build_tree((skeleton, [leaf] * len(skeleton)))
    return AccessSequence(tree.sequence, n), tree


def _path_from_choices(n: int, take_max: Sequence[bool]) -> AccessSequence:
    lo, hi = 1, n
    keys = []
    for high in take_max:
        if high:
            keys.append(hi)
            hi -= 1
        else:
            keys.append(lo)
            lo += 1
    keys.append(lo)
    return AccessSequence(tuple(keys), n)


def gen_path_preorder(n: int, seed: int | None = None) -> AccessSequence:
    """Preorder of a path-shaped BST: each key is the min or max of what remains."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    rng = _rng(seed)
    return _path_from_choices(n, [bool(c) for c in rng.integers(0, 2, size=n - 1)])


def enumerate_path_preorders(n: int) -> Iterator[AccessSequence]:
    for choices in itertools.product((False, True), repeat=n - 1):
        yield _path_from_choices(n, choices)


def gen_random_permutation(n: int, seed: int | None = None) -> AccessSequence:
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    perm = _rng(seed).permutation(n) + 1
    return AccessSequence(tuple(int(x) for x in perm), n)


def gen_alternating(n: int) -> AccessSequence:
    return AccessSequence(alternating_permutation(n), n)


def _apply(ops: str, seq: AccessSequence) -> AccessSequence:
    for op in ops:
        seq = reverse(seq) if op == "R" else complement(seq)
    return seq


def gen_avoiding(pattern: Sequence[int], n: int, seed: int | None = None, attempts: int = 10_000) -> AccessSequence:
    """
    Random permutation of size n avoiding ``pattern``.

    Patterns of size 2 and 3 are reached from the preorder (avoids 2,3,1)
    and 3-increasing (avoids 3,2,1) generators by reversal and complement.
    Larger patterns fall back to rejection sampling.
    """
    pattern = tuple(pattern)
    size = len(pattern)
    if size < 2:
        raise ValueError("Every non-empty sequence contains the pattern (1)")
    if size == 2:
        keys = range(1, n + 1) if pattern == (2, 1) else range(n, 0, -1)
        return AccessSequence(tuple(keys), n)
    if size == 3:
        bases = {(2, 3, 1): lambda: gen_preorder(n, seed), (3, 2, 1): lambda: gen_k_increasing(n, 3, seed)}
        for base, make in bases.items():
            base_seq = AccessSequence(base, 3)
            for ops in ("", "R", "C", "RC"):
                if _apply(ops, base_seq).keys == pattern:
                    return _apply(ops, make())
    rng = _rng(seed)
    needle = PatternMatrix.from_permutation(pattern)
    for _ in range(attempts):
        candidate = tuple(int(x) for x in rng.permutation(n) + 1)
        if not contains(candidate, needle):
            return AccessSequence(candidate, n)
    raise ResourceLimitError(f"No {pattern}-avoiding permutation of size {n} in {attempts} samples")


# ──────────────────────────────────────────────────────────────────────────────
# File formats
# ──────────────────────────────────────────────────────────────────────────────

def format_sequence(seq: AccessSequence) -> str:
    return f"{seq.n} {seq.m}\n{' '.join(map(str, seq.keys))}\n"


def parse_sequence(text: str) -> AccessSequence:
    tokens = text.split()
    if len(tokens) < 2:
        raise ValueError("Sequence text must start with an 'n m' header")
    n, m = int(tokens[0]), int(tokens[1])
    keys = tuple(int(tok) for tok in tokens[2:])
    if len(keys) != m:
        raise ValueError(f"Header announces {m} accesses, found {len(keys)}")
    return AccessSequence(keys, n)


def sequence_to_json(seq: AccessSequence) -> str:
    return json.dumps({"n": seq.n, "m": seq.m, "keys": list(seq.keys)})


def sequence_from_json(text: str) -> AccessSequence:
    data = json.loads(text)
    return AccessSequence(tuple(data["keys"]), data["n"])


def write_sequence(seq: AccessSequence, path: str | Path) -> None:
    Path(path).write_text(format_sequence(seq))


def read_sequence(path: str | Path) -> AccessSequence:
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        return sequence_from_json(text)
    return parse_sequence(text)
