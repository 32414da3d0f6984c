import numpy as np
import pytest

from bst_lab.decomposition import Block, build_tree, decompose
from bst_lab.geometry import Point, PointGrid, Rect, is_satisfied_set
from bst_lab.greedy import run_greedy
from bst_lab.rgreedy import (
    contracted_matrix,
    decomposition_bound,
    node_blocks,
    region_matrix,
    regions,
    run_rgreedy,
    topwing,
)
from bst_lab.sequences import AccessSequence, gen_k_decomposable
from bst_lab.trees import InitialTree


def test_topwing_keeps_visible_tops_and_edges() -> None:
    grid = PointGrid([(1, 6), (2, 4), (3, 5), (1, 2), (2, 1)])
    assert topwing(grid, Rect.box(1, 3, 1, 6)) == [Point(1, 6), Point(3, 5)]
    assert topwing(grid, Rect.box(1, 3, 7, 9)) == []


def test_regions_are_indexed_by_value_then_time() -> None:
    blocks = [Block(1, 1, 2, 2), Block(2, 3, 3, 4), Block(4, 4, 1, 1)]
    found = {(r.i, r.j): r.rect for r in regions(blocks)}
    assert len(found) == 9
    assert found[(1, 3)] == Rect.box(1, 1, 4, 4)
    assert found[(3, 2)] == Rect.box(3, 4, 2, 3)


def test_region_matrix_against_skeleton() -> None:
    blocks = [Block(1, 1, 2, 2), Block(2, 3, 3, 4), Block(4, 4, 1, 1)]
    touch = run_greedy(AccessSequence((2, 3, 4, 1), 4)).touch
    regions_touched = region_matrix(touch, blocks)
    skeleton_touched = contracted_matrix((2, 3, 1))
    assert list(zip(*np.nonzero(regions_touched != skeleton_touched))) == [(2, 2)]
    assert regions_touched[2, 2] and not skeleton_touched[2, 2]


def test_rgreedy_matches_greedy_with_singleton_leaves() -> None:
    seq = AccessSequence((2, 4, 1, 3), 4)
    tree = decompose(seq.keys)
    assert [b.size for b in node_blocks(tree.root)] == [1, 1, 1, 1]
    assert run_rgreedy(seq, tree).rows == run_greedy(seq).rows


@pytest.mark.parametrize("k", [2, 3])
def test_rgreedy_is_satisfied_and_within_bound(k: int) -> None:
    for seed in range(4):
        seq, tree = gen_k_decomposable(24, k, seed=seed)
        bound = decomposition_bound(seq, tree)
        assert bound.trace.algorithm == "rgreedy"
        assert bound.holds, f"k={k} seed={seed}: {bound.lhs} > {bound.rhs}"
        assert is_satisfied_set(bound.trace.touch), f"k={k} seed={seed}"


def test_rgreedy_rejects_bad_inputs() -> None:
    seq = AccessSequence((2, 4, 1, 3), 4)
    tree = decompose(seq.keys)
    with pytest.raises(ValueError):
        run_rgreedy(seq, tree, InitialTree.balanced(4))
    with pytest.raises(ValueError):
        run_rgreedy(AccessSequence((3, 1, 4, 2), 4), tree)


@pytest.mark.parametrize("k", [2, 3, 4])
def test_root_regions_follow_greedy_on_the_skeleton(k: int) -> None:
    for seed in range(10):
        seq, tree = gen_k_decomposable(32, k, seed=seed)
        touch = run_rgreedy(seq, tree).touch
        before_last_row = PointGrid([(p.x, p.y) for p in touch if p.y < seq.n])
        expected = contracted_matrix(tree.root.pattern)
        blocks = node_blocks(tree.root)
        assert np.array_equal(region_matrix(touch, blocks), expected), f"k={k} seed={seed}"
        assert np.array_equal(region_matrix(before_last_row, blocks), expected), f"k={k} seed={seed}"


def test_augmentation_when_nested_blocks_end_together() -> None:
    # (4,6,5) then (3,2,1) under a 2-1 node, followed by a lone 7
    tree = build_tree(((1, 2), [((2, 1), [(1, 3, 2), (3, 2, 1)]), (1,)]))
    seq = AccessSequence(tree.sequence, 7)
    assert seq.keys == (4, 6, 5, 3, 2, 1, 7)

    plain = run_greedy(seq)
    robust = run_rgreedy(seq, tree)
    assert robust.rows[:5] == plain.rows[:5]
    assert plain.rows[5] == (1, 2)
    assert robust.rows[5] == (1, 2, 3, 4, 6)
    assert robust.rows[6] == (6, 7)
    assert is_satisfied_set(robust.touch)
