"""
trees.py
~~~~~~~~
Initial BST shapes over the keys 1..n: built by insertion, balanced,
random or exhaustively, and written as preorder strings like ``2,1,3``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np


@dataclass(frozen=True)
class InitialTree:
    """
    BST shape over the keys 1..n.

    ``left[x]`` / ``right[x]`` hold the children of key x (0 = no child);
    index 0 of both tuples is unused.
    """

    n: int
    root: int
    left: tuple[int, ...]
    right: tuple[int, ...]
    _depth: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"Tree needs at least one key, got n={self.n}")
        if len(self.left) != self.n + 1 or len(self.right) != self.n + 1:
            raise ValueError("Child tables must have n+1 entries")
        depth = [0] * (self.n + 1)
        seen = 0
        stack = [(self.root, 1, 1, self.n)]
        while stack:
            x, d, lo, hi = stack.pop()
            if not lo <= x <= hi or depth[x]:
                raise ValueError(f"Key {x} breaks BST order or appears twice")
            depth[x] = d
            seen += 1
            if self.left[x]:
                stack.append((self.left[x], d + 1, lo, x - 1))
            if self.right[x]:
                stack.append((self.right[x], d + 1, x + 1, hi))
        if seen != self.n:
            raise ValueError(f"Tree reaches {seen} of {self.n} keys")
        object.__setattr__(self, "_depth", tuple(depth))

    # ── constructors ──────────────────────────────────────────────────────────

    @classmethod
    def from_insertion(cls, keys: Sequence[int]) -> "InitialTree":
        """Insert ``keys`` in order into an empty BST (a preorder rebuilds its tree)."""
        n = len(keys)
        if n == 0:
            raise ValueError("Cannot build a tree from no keys")
        if sorted(keys) != list(range(1, n + 1)):
            raise ValueError("Keys must be a permutation of 1..n")
        left = [0] * (n + 1)
        right = [0] * (n + 1)
        root = keys[0]
        for key in keys[1:]:
            node = root
            while True:
                side = left if key < node else right
                if side[node]:
                    node = side[node]
                else:
                    side[node] = key
                    break
        return cls(n, root, tuple(left), tuple(right))

    @classmethod
    def balanced(cls, n: int) -> "InitialTree":
        order: list[int] = []
        stack = [(1, n)]
        while stack:
            lo, hi = stack.pop()
            if lo > hi:
                continue
            mid = (lo + hi) // 2
            order.append(mid)
            stack.append((mid + 1, hi))
            stack.append((lo, mid - 1))
        return cls.from_insertion(order)

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "InitialTree":
        """Uniform recursive root splitting: random root, then recurse on both sides."""
        if n < 1:
            raise ValueError(f"n must be positive, got {n}")
        order: list[int] = []
        stack = [(1, n)]
        while stack:
            lo, hi = stack.pop()
            if lo > hi:
                continue
            root = int(rng.integers(lo, hi + 1))
            order.append(root)
            stack.append((root + 1, hi))
            stack.append((lo, root - 1))
        return cls.from_insertion(order)

    @classmethod
    def all_shapes(cls, n: int) -> Iterator["InitialTree"]:
        for order in _shape_preorders(1, n):
            yield cls.from_insertion(order)

    @classmethod
    def parse(cls, text: str) -> "InitialTree":
        """Parse the comma-separated preorder used in trace headers."""
        return cls.from_insertion([int(tok) for tok in text.replace(" ", "").split(",") if tok])

    # ── structure ─────────────────────────────────────────────────────────────

    def depth(self, x: int) -> int:
        return self._depth[x]

    @cached_property
    def height(self) -> int:
        return max(self._depth[1:])

    def path(self, a: int) -> list[int]:
        node, out = self.root, []
        while node:
            out.append(node)
            if a == node:
                return out
            node = self.left[node] if a < node else self.right[node]
        raise ValueError(f"Key {a} is not in the tree")

    def subtree(self, x: int) -> list[int]:
        out, stack = [], [x] if x else []
        while stack:
            node = stack.pop()
            out.append(node)
            stack += [c for c in (self.left[node], self.right[node]) if c]
        return sorted(out)

    def preorder(self) -> list[int]:
        out, stack = [], [self.root]
        while stack:
            node = stack.pop()
            out.append(node)
            if self.right[node]:
                stack.append(self.right[node])
            if self.left[node]:
                stack.append(self.left[node])
        return out

    def format(self) -> str:
        return ",".join(map(str, self.preorder()))


def _shape_preorders(lo: int, hi: int) -> Iterator[list[int]]:
    if lo > hi:
        yield []
        return
    for root in range(lo, hi + 1):
        for left in _shape_preorders(lo, root - 1):
            for right in _shape_preorders(root + 1, hi):
                yield [root, *left, *right]
