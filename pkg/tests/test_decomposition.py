import itertools
from pathlib import Path

import pytest

from bst_lab.decomposition import (
    Block,
    DecompositionTree,
    build_tree,
    decompose,
    deflations,
    enumerate_simple,
    find_blocks,
    format_tree,
    inflate,
    is_k_decomposable,
    is_simple,
    normalize,
    parse_tree,
    read_tree,
    rechunk,
    tree_from_json,
    tree_to_json,
    write_tree,
)
from bst_lab.patterns import PatternMatrix, contains
from bst_lab.sequences import gen_k_decomposable


def test_normalize_and_inflate() -> None:
    assert normalize([10, 30, 20]) == (1, 3, 2)
    assert inflate((2, 1), [(1, 2), (1,)]) == (2, 3, 1)
    assert inflate((1, 2), [(2, 1), (2, 1)]) == (2, 1, 4, 3)
    with pytest.raises(ValueError):
        inflate((1, 2), [(1,)])


def test_block_validation() -> None:
    assert Block(2, 3, 3, 4).size == 2
    with pytest.raises(ValueError):
        Block(1, 2, 1, 3)


def test_simple_permutations() -> None:
    assert is_simple((2, 4, 1, 3))
    assert is_simple((2, 1))
    assert not is_simple((1, 2, 3))
    assert enumerate_simple(4) == [(2, 4, 1, 3), (3, 1, 4, 2)]
    assert len(enumerate_simple(5)) == 6
    assert len(enumerate_simple(6)) == 46


def test_find_blocks_returns_maximal_ones() -> None:
    assert find_blocks((2, 3, 1)) == [Block(1, 2, 2, 3)]
    assert find_blocks((2, 4, 1, 3)) == []


def test_decompose_simple_root() -> None:
    tree = decompose((2, 4, 1, 3))
    tree.validate()
    assert tree.root.pattern == (2, 4, 1, 3)
    assert [leaf.pattern for leaf in tree.leaves()] == [(1,)] * 4


def test_decompose_linear_chain_is_left_leaning() -> None:
    tree = decompose((2, 3, 4, 1))
    tree.validate()
    assert tree.root.pattern == (2, 1)
    assert tree.root.children[0].block == Block(1, 3, 2, 4)
    assert tree.root.children[1].block == Block(4, 4, 1, 1)


def test_rechunk_groups_linear_runs() -> None:
    tree = decompose((1, 2, 3, 4))
    wide = rechunk(tree, 4)
    wide.validate()
    assert wide.root.pattern == (1, 2, 3, 4)

    narrow = rechunk(tree, 2)
    narrow.validate()
    assert all(len(nd.pattern) == 2 for nd in narrow.internal_nodes())


def test_is_k_decomposable() -> None:
    assert is_k_decomposable((2, 4, 1, 3), 2) == (False, None)
    ok, tree = is_k_decomposable((2, 4, 1, 3), 4)
    assert ok and tree is not None
    ok, tree = is_k_decomposable((3, 1, 2, 5, 4), 2)
    assert ok
    tree.validate()


def test_decomposability_agrees_with_simple_avoidance() -> None:
    simple = {size: [PatternMatrix.from_permutation(p) for p in enumerate_simple(size)] for size in (3, 4, 5)}
    for perm in itertools.permutations(range(1, 6)):
        for k in (2, 3):
            decomposable, _ = is_k_decomposable(perm, k)
            avoids = all(contains(perm, p) is None for size in (k + 1, k + 2) for p in simple[size])
            assert decomposable == avoids, f"{perm} k={k}"


def test_deflations_of_a_linear_permutation() -> None:
    found = list(deflations((2, 3, 4, 1)))
    skeletons = {sk for sk, _ in found}
    assert (2, 3, 1) in skeletons
    assert ((2, 3, 1), [Block(1, 1, 2, 2), Block(2, 3, 3, 4), Block(4, 4, 1, 1)]) in found
    assert all(len(blocks) >= 2 for _, blocks in found)
    assert list(deflations((2, 4, 1, 3))) == [((2, 4, 1, 3), [Block(i, i, v, v) for i, v in enumerate((2, 4, 1, 3), 1)])]


def test_text_format_round_trip() -> None:
    tree = decompose((2, 4, 1, 3))
    text = format_tree(tree)
    assert text == "(2,4,1,3 | 1 1 1 1)"
    assert parse_tree(text).sequence == (2, 4, 1, 3)

    nested = build_tree(((2, 1), [((1, 2), [(1,), (2, 1)]), (1,)]))
    assert nested.sequence == (2, 4, 3, 1)
    assert parse_tree(format_tree(nested)).sequence == nested.sequence
    with pytest.raises(ValueError):
        parse_tree("(2,1 | 1")


def test_json_and_files(tmp_path: Path) -> None:
    _, tree = gen_k_decomposable(30, 3, seed=4)
    back = tree_from_json(tree_to_json(tree))
    assert back.sequence == tree.sequence
    back.validate()

    path = tmp_path / "tree.txt"
    write_tree(tree, path)
    assert read_tree(path).sequence == tree.sequence


def test_validate_rejects_foreign_sequence() -> None:
    tree = decompose((2, 4, 1, 3))
    with pytest.raises(ValueError):
        DecompositionTree(tree.root, (1, 2, 3, 4)).validate()
