import itertools
from collections import Counter
from pathlib import Path

import numpy as np
import pytest

from bst_lab.patterns import PatternMatrix, contains, longest_decreasing
from bst_lab.sequences import (
    AccessSequence,
    complement,
    enumerate_path_preorders,
    gen_alternating,
    gen_avoiding,
    gen_cole_showcase,
    gen_k_decomposable,
    gen_k_increasing,
    gen_path_preorder,
    gen_perturbed_grid,
    gen_preorder,
    gen_random_permutation,
    gen_sequential,
    gen_uniform_decomposable,
    read_sequence,
    reverse,
    sequence_from_json,
    sequence_to_json,
    write_sequence,
)
from bst_lab.trees import InitialTree


def test_access_sequence_validates_keys() -> None:
    with pytest.raises(ValueError):
        AccessSequence((1, 5), 4)
    with pytest.raises(ValueError):
        AccessSequence((), 0)

    seq = AccessSequence.of([2, 2, 1])
    assert seq.n == 2 and seq.m == 3
    assert not seq.is_permutation
    with pytest.raises(ValueError):
        seq.require_permutation()


def test_symmetries() -> None:
    seq = AccessSequence((2, 3, 1), 3)
    assert reverse(seq).keys == (1, 3, 2)
    assert complement(seq).keys == (2, 1, 3)


def test_preorders_avoid_231_and_rebuild_their_tree() -> None:
    needle = PatternMatrix.from_permutation((2, 3, 1))
    for seed in range(5):
        seq = gen_preorder(30, seed)
        assert seq.is_permutation
        assert contains(seq.keys, needle) is None, f"seed {seed}: {seq.keys}"
        assert InitialTree.from_insertion(seq.keys).preorder() == list(seq.keys)
    assert gen_preorder(30, 7) == gen_preorder(30, 7)


def test_sequential_and_alternating() -> None:
    assert gen_sequential(5).keys == (1, 2, 3, 4, 5)
    assert gen_alternating(6).keys == (3, 6, 1, 5, 2, 4)


def test_k_increasing_has_short_decreasing_runs() -> None:
    for seed in range(5):
        seq = gen_k_increasing(40, 3, seed)
        assert seq.is_permutation
        assert longest_decreasing(seq.keys) <= 2
    with pytest.raises(ValueError):
        gen_k_increasing(10, 1)


def test_k_decomposable_tree_matches_sequence() -> None:
    for k in (2, 3, 4):
        seq, tree = gen_k_decomposable(50, k, seed=k)
        assert seq.keys == tree.sequence
        tree.validate()
        assert max(len(nd.pattern) for nd in tree.internal_nodes()) <= k


def test_uniform_decomposable() -> None:
    seq, tree = gen_uniform_decomposable((2, 4, 1, 3), depth=2)
    assert seq.n == 16
    assert all(nd.pattern == (2, 4, 1, 3) for nd in tree.internal_nodes())
    assert len(tree.leaves()) == 16


def test_perturbed_grid_small_case() -> None:
    assert gen_perturbed_grid(3).keys == (1, 4, 7, 2, 5, 8, 3, 6, 9)
    assert gen_perturbed_grid(5).is_permutation


def test_cole_showcase_shape() -> None:
    seq, tree = gen_cole_showcase(1280, seed=1)
    assert seq.n == 1280
    assert len(tree.root.children) == 128
    assert all(leaf.pattern == tuple(range(1, 11)) for leaf in tree.root.children)
    with pytest.raises(ValueError):
        gen_cole_showcase(1024)


def test_path_preorders() -> None:
    all_paths = list(enumerate_path_preorders(4))
    assert len(all_paths) == 8
    assert len({s.keys for s in all_paths}) == 8
    for seq in all_paths:
        tree = InitialTree.from_insertion(seq.keys)
        assert tree.height == 4
    assert gen_path_preorder(6, 3).keys in {s.keys for s in enumerate_path_preorders(6)}


def test_gen_avoiding_every_pattern_of_size_three() -> None:
    for pattern in itertools.permutations((1, 2, 3)):
        seq = gen_avoiding(pattern, 20, seed=2)
        assert seq.is_permutation
        assert contains(seq.keys, PatternMatrix.from_permutation(pattern)) is None, f"{pattern}: {seq.keys}"


def test_random_permutation_is_seeded() -> None:
    a = gen_random_permutation(12, 3)
    assert a == gen_random_permutation(12, 3)
    assert sorted(a.keys) == list(range(1, 13))
    assert np.array_equal(np.sort(np.array(a.keys)), np.arange(1, 13))


def test_random_permutation_is_uniform() -> None:
    counts = Counter(gen_random_permutation(3, seed).keys for seed in range(10_000))
    assert set(counts) == set(itertools.permutations((1, 2, 3)))
    for perm, count in counts.items():
        assert abs(count / 10_000 - 1 / 6) <= 0.02, perm


def test_sequence_files(tmp_path: Path) -> None:
    seq = AccessSequence((3, 1, 3, 2), 4)
    path = tmp_path / "x.seq"
    write_sequence(seq, path)
    assert path.read_text() == "4 4\n3 1 3 2\n"
    assert read_sequence(path) == seq

    json_path = tmp_path / "x.json"
    json_path.write_text(sequence_to_json(seq))
    assert read_sequence(json_path) == seq
    assert sequence_from_json(sequence_to_json(seq)) == seq


def test_parse_rejects_wrong_count(tmp_path: Path) -> None:
    path = tmp_path / "bad.seq"
    path.write_text("3 4\n1 2 3\n")
    with pytest.raises(ValueError):
        read_sequence(path)
