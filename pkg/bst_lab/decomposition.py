"""
decomposition.py
~~~~~~~~~~~~~~~~
Blocks, substitution decomposition trees, simple permutations, inflation and
k-decomposability.

A block is a run of consecutive positions whose values form a run of
consecutive integers.  The canonical tree keeps simple skeletons as they
are and breaks every increasing or decreasing run of components into a
left-leaning chain of (1,2) or (2,1) nodes.
"""

from __future__ import annotations

import itertools
import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence, Union

from bst_lab.settings import ResourceLimitError

logger = logging.getLogger(__name__)

MAX_SIMPLE_ENUMERATION = 8

# A leaf is a bare permutation; an internal node is (skeleton, [child specs]).
TreeSpec = Union[tuple[int, ...], tuple[tuple[int, ...], list]]


@dataclass(frozen=True)
class Block:
    """Positions start..end carrying exactly the values low..high (1-based, inclusive)."""

    start: int
    end: int
    low: int
    high: int

    def __post_init__(self) -> None:
        if self.end < self.start or self.end - self.start != self.high - self.low:
            raise ValueError(f"Block {self} has mismatched position and value extents")

    @property
    def size(self) -> int:
        return self.end - self.start + 1

    def __str__(self) -> str:
        return f"[{self.start},{self.end}]x[{self.low},{self.high}]"


@dataclass(frozen=True)
class DecompNode:
    block: Block
    # skeleton for internal nodes, the induced permutation for leaves
    pattern: tuple[int, ...]
    children: tuple["DecompNode", ...] = ()

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def skeleton(self) -> tuple[int, ...]:
        if self.is_leaf:
            raise ValueError(f"Leaf {self.block} has no skeleton")
        return self.pattern

    def children_by_value(self) -> list["DecompNode"]:
        return sorted(self.children, key=lambda c: c.block.low)


@dataclass(frozen=True)
class DecompositionTree:
    root: DecompNode
    sequence: tuple[int, ...]

    def nodes(self) -> Iterator[DecompNode]:
        """Preorder."""
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def internal_nodes(self) -> list[DecompNode]:
        return [nd for nd in self.nodes() if not nd.is_leaf]

    def leaves(self) -> list[DecompNode]:
        return [nd for nd in self.nodes() if nd.is_leaf]

    def parents(self) -> dict[int, DecompNode]:
        """Map id(child) -> parent node."""
        return {id(c): nd for nd in self.nodes() for c in nd.children}

    def validate(self) -> None:
        seq = self.sequence
        n = len(seq)
        if self.root.block != Block(1, n, 1, n):
            raise ValueError(f"Root block {self.root.block} does not cover 1..{n}")
        for node in self.nodes():
            b = node.block
            if b.end > n or sorted(seq[b.start - 1 : b.end]) != list(range(b.low, b.high + 1)):
                raise ValueError(f"{b} is not a block of the sequence")
            if node.is_leaf:
                if node.pattern != normalize(seq[b.start - 1 : b.end]):
                    raise ValueError(f"Leaf {b} pattern {node.pattern} differs from its values")
                continue
            if len(node.children) < 2:
                raise ValueError(f"Internal node {b} has arity {len(node.children)}")
            pos = b.start
            for child in node.children:
                if child.block.start != pos:
                    raise ValueError(f"Children of {b} do not partition its positions")
                pos = child.block.end + 1
            if pos != b.end + 1:
                raise ValueError(f"Children of {b} do not reach its end")
            if node.pattern != normalize([c.block.low for c in node.children]):
                raise ValueError(f"Skeleton {node.pattern} of {b} does not match its children")


def normalize(values: Sequence[int]) -> tuple[int, ...]:
    """Rank-compress ``values`` to the order-isomorphic permutation."""
    ranks = {v: i for i, v in enumerate(sorted(values), start=1)}
    return tuple(ranks[v] for v in values)


def _require_permutation(perm: Sequence[int]) -> tuple[int, ...]:
    perm = tuple(perm)
    if sorted(perm) != list(range(1, len(perm) + 1)):
        raise ValueError(f"Not a permutation: {perm[:12]}")
    return perm


def inflate(skeleton: Sequence[int], children: Sequence[Sequence[int]]) -> tuple[int, ...]:
    """Substitution product: child i takes position slot i and value slot skeleton[i]."""
    skeleton = _require_permutation(skeleton)
    if len(children) != len(skeleton):
        raise ValueError(f"Skeleton of size {len(skeleton)} got {len(children)} children")
    kids = [_require_permutation(c) for c in children]
    base = [0] * len(kids)
    acc = 0
    for i in sorted(range(len(kids)), key=lambda i: skeleton[i]):
        base[i] = acc
        acc += len(kids[i])
    return tuple(base[i] + v for i, child in enumerate(kids) for v in child)


# ──────────────────────────────────────────────────────────────────────────────
# Building trees from nested descriptions
# ──────────────────────────────────────────────────────────────────────────────

def _is_leaf_spec(spec: TreeSpec) -> bool:
    return not spec or not isinstance(spec[0], (tuple, list))


def _spec_size(spec: TreeSpec) -> int:
    if _is_leaf_spec(spec):
        return len(_require_permutation(spec))
    skeleton, children = spec
    skeleton = _require_permutation(skeleton)
    if len(children) != len(skeleton) or len(children) < 2:
        raise ValueError(f"Skeleton {skeleton} needs {len(skeleton)} >= 2 children, got {len(children)}")
    return sum(_spec_size(c) for c in children)


def _place(spec: TreeSpec, start: int, low: int, out: list[int]) -> DecompNode:
    size = _spec_size(spec)
    block = Block(start, start + size - 1, low, low + size - 1)
    if _is_leaf_spec(spec):
        perm = tuple(spec)
        out[start - 1 : start - 1 + size] = [low - 1 + v for v in perm]
        return DecompNode(block, perm)
    skeleton, children = tuple(spec[0]), spec[1]
    sizes = [_spec_size(c) for c in children]
    value_start = [0] * len(children)
    acc = low
    for i in sorted(range(len(children)), key=lambda i: skeleton[i]):
        value_start[i] = acc
        acc += sizes[i]
    kids = []
    pos = start
    for child, size_i, v0 in zip(children, sizes, value_start):
        kids.append(_place(child, pos, v0, out))
        pos += size_i
    return DecompNode(block, skeleton, tuple(kids))


def build_tree(spec: TreeSpec) -> DecompositionTree:
    """Inflate a nested (skeleton, children) description into a tree with its sequence."""
    n = _spec_size(spec)
    out = [0] * n
    root = _place(spec, 1, 1, out)
    return DecompositionTree(root, tuple(out))


# ──────────────────────────────────────────────────────────────────────────────
# Blocks and simple permutations
# ──────────────────────────────────────────────────────────────────────────────

def _all_proper_blocks(perm: Sequence[int]) -> list[tuple[int, int]]:
    n = len(perm)
    found = []
    for a in range(n):
        lo = hi = perm[a]
        for b in range(a + 1, n):
            lo, hi = min(lo, perm[b]), max(hi, perm[b])
            if hi - lo == b - a and b - a + 1 < n:
                found.append((a, b))
    return found


def find_blocks(perm: Sequence[int]) -> list[Block]:
    """Inclusion-maximal blocks of size strictly between 1 and n."""
    perm = _require_permutation(perm)
    intervals = sorted(_all_proper_blocks(perm), key=lambda ab: (ab[0], -ab[1]))
    maximal = []
    reach = -1
    for a, b in intervals:
        if b <= reach:
            continue
        reach = b
        maximal.append(Block(a + 1, b + 1, min(perm[a : b + 1]), max(perm[a : b + 1])))
    return maximal


def is_simple(perm: Sequence[int]) -> bool:
    perm = _require_permutation(perm)
    return len(perm) <= 2 or not _all_proper_blocks(perm)


def enumerate_simple(k: int) -> list[tuple[int, ...]]:
    if k > MAX_SIMPLE_ENUMERATION:
        raise ResourceLimitError(f"Refusing to enumerate S_{k}; the limit is {MAX_SIMPLE_ENUMERATION}")
    if k < 1:
        return []
    return [p for p in itertools.permutations(range(1, k + 1)) if is_simple(p)]


def _linear_split(seg: Sequence[int]) -> tuple[int, tuple[int, int]] | None:
    """Largest proper prefix holding the lowest (or highest) values of ``seg``."""
    low, high = min(seg), max(seg)
    best = None
    pmin = pmax = seg[0]
    for p in range(1, len(seg)):
        if pmax - pmin == p - 1:
            if pmin == low:
                best = (p, (1, 2))
            elif pmax == high:
                best = (p, (2, 1))
        pmin, pmax = min(pmin, seg[p]), max(pmax, seg[p])
    return best


def decompose(perm: Sequence[int]) -> DecompositionTree:
    """Canonical substitution decomposition tree of ``perm``."""
    perm = _require_permutation(perm)
    n = len(perm)
    if n == 0:
        raise ValueError("Cannot decompose the empty permutation")
    # frames: [block, pattern, child frame ids]; children are always created
    # after their parent, so a reverse sweep builds the frozen nodes bottom-up
    frames: list[tuple[Block, tuple[int, ...], list[int]]] = []

    def push(start: int, end: int) -> int:
        seg = perm[start - 1 : end]
        frames.append((Block(start, end, min(seg), max(seg)), (), []))
        return len(frames) - 1

    push(1, n)
    i = 0
    while i < len(frames):
        block, _, kids = frames[i]
        seg = perm[block.start - 1 : block.end]
        if block.size == 1:
            frames[i] = (block, (1,), kids)
        elif (split := _linear_split(seg)) is not None:
            p, skeleton = split
            kids += [push(block.start, block.start + p - 1), push(block.start + p, block.end)]
            frames[i] = (block, skeleton, kids)
        else:
            pos = block.start
            inner = find_blocks(normalize(seg))
            covered = {(b.start + block.start - 1): b.size for b in inner}
            while pos <= block.end:
                size = covered.get(pos, 1)
                kids.append(push(pos, pos + size - 1))
                pos += size
            skeleton = normalize([frames[k][0].low for k in kids])
            frames[i] = (block, skeleton, kids)
        i += 1

    built: list[DecompNode | None] = [None] * len(frames)
    for idx in range(len(frames) - 1, -1, -1):
        block, pattern, kids = frames[idx]
        built[idx] = DecompNode(block, pattern, tuple(built[k] for k in kids))
    return DecompositionTree(built[0], perm)


def _run_components(node: DecompNode) -> list[DecompNode]:
    """Flatten a left-leaning chain of identical linear skeletons into its components."""
    comps = []
    cur = node
    while not cur.is_leaf and cur.pattern == node.pattern:
        comps.append(cur.children[1])
        cur = cur.children[0]
    comps.append(cur)
    return comps[::-1]


def _union_block(children: Sequence[DecompNode]) -> Block:
    return Block(
        children[0].block.start,
        children[-1].block.end,
        min(c.block.low for c in children),
        max(c.block.high for c in children),
    )


def _rechunk_node(node: DecompNode, k: int) -> DecompNode:
    if node.is_leaf:
        return node
    if node.pattern not in ((1, 2), (2, 1)):
        return DecompNode(node.block, node.pattern, tuple(_rechunk_node(c, k) for c in node.children))
    comps = [_rechunk_node(c, k) for c in _run_components(node)]
    rising = node.pattern == (1, 2)
    group = comps[:k]
    rest = comps[k:]
    while True:
        skeleton = tuple(range(1, len(group) + 1)) if rising else tuple(range(len(group), 0, -1))
        current = DecompNode(_union_block(group), skeleton, tuple(group))
        if not rest:
            return current
        group, rest = [current, *rest[: k - 1]], rest[k - 1 :]


def rechunk(tree: DecompositionTree, k: int) -> DecompositionTree:
    """Regroup linear chains into nodes of arity <= k."""
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    return DecompositionTree(_rechunk_node(tree.root, k), tree.sequence)


def is_k_decomposable(perm: Sequence[int], k: int) -> tuple[bool, DecompositionTree | None]:
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    tree = decompose(perm)
    widest = max((len(nd.pattern) for nd in tree.internal_nodes()), default=0)
    if widest > k:
        return False, None
    return True, rechunk(tree, k)


def deflations(perm: Sequence[int]) -> Iterator[tuple[tuple[int, ...], list[Block]]]:
    """Every split of ``perm`` into >= 2 consecutive blocks, with its skeleton."""
    perm = _require_permutation(perm)
    n = len(perm)
    for cuts in itertools.product((False, True), repeat=n - 1):
        if not any(cuts):
            continue
        blocks, start = [], 0
        for i in range(n):
            if i == n - 1 or cuts[i]:
                seg = perm[start : i + 1]
                if max(seg) - min(seg) != i - start:
                    break
                blocks.append(Block(start + 1, i + 1, min(seg), max(seg)))
                start = i + 1
        else:
            yield normalize([b.low for b in blocks]), blocks


# ──────────────────────────────────────────────────────────────────────────────
# Serialization: "(skeleton | child child ...)" with bare leaves, and JSON
# ──────────────────────────────────────────────────────────────────────────────

def _perm_text(perm: Sequence[int]) -> str:
    return ",".join(map(str, perm))


def format_tree(tree: DecompositionTree) -> str:
    tokens: list[str] = []
    stack: list[DecompNode | str] = [tree.root]
    while stack:
        item = stack.pop()
        if isinstance(item, str):
            tokens.append(item)
        elif item.is_leaf:
            tokens.append(_perm_text(item.pattern))
        else:
            tokens.append(f"({_perm_text(item.pattern)} |")
            stack.append(")")
            stack.extend(reversed(item.children))
    return " ".join(tokens).replace(" )", ")")


_TOKEN = re.compile(r"\(|\)|\||[0-9]+(?:,[0-9]+)*")


def parse_tree(text: str) -> DecompositionTree:
    tokens = _TOKEN.findall(text)
    if "".join(tokens) != re.sub(r"\s+", "", text):
        raise ValueError(f"Unexpected characters in tree text {text!r}")
    pos = 0

    def perm_at(i: int) -> tuple[int, ...]:
        if i >= len(tokens) or tokens[i] in "()|":
            raise ValueError(f"Expected a permutation at token {i} of {text!r}")
        return tuple(int(v) for v in tokens[i].split(","))

    def node() -> TreeSpec:
        nonlocal pos
        if pos < len(tokens) and tokens[pos] == "(":
            skeleton = perm_at(pos + 1)
            if pos + 2 >= len(tokens) or tokens[pos + 2] != "|":
                raise ValueError(f"Expected '|' after skeleton {skeleton}")
            pos += 3
            children = []
            while pos < len(tokens) and tokens[pos] != ")":
                children.append(node())
            if pos >= len(tokens):
                raise ValueError("Unbalanced parentheses in tree text")
            pos += 1
            return (skeleton, children)
        leaf = perm_at(pos)
        pos += 1
        return leaf

    spec = node()
    if pos != len(tokens):
        raise ValueError(f"Trailing tokens in tree text {text!r}")
    return build_tree(spec)


def _node_json(node: DecompNode) -> dict:
    if node.is_leaf:
        return {"leaf": list(node.pattern)}
    return {"skeleton": list(node.pattern), "children": [_node_json(c) for c in node.children]}


def _spec_from_json(data: dict) -> TreeSpec:
    if "leaf" in data:
        return tuple(data["leaf"])
    return (tuple(data["skeleton"]), [_spec_from_json(c) for c in data["children"]])


def tree_to_json(tree: DecompositionTree) -> str:
    return json.dumps(_node_json(tree.root))


def tree_from_json(text: str) -> DecompositionTree:
    return build_tree(_spec_from_json(json.loads(text)))


def write_tree(tree: DecompositionTree, path: str | Path) -> None:
    Path(path).write_text(format_tree(tree) + "\n")


def read_tree(path: str | Path) -> DecompositionTree:
    text = Path(path).read_text().strip()
    return tree_from_json(text) if text.startswith("{") else parse_tree(text)
