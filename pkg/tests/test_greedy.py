import itertools
from pathlib import Path

import numpy as np
import pytest

from bst_lab.geometry import is_satisfied_set
from bst_lab.greedy import (
    ExecutionTrace,
    GreedyState,
    check_wing_accounting,
    encode_initial_tree,
    find_hidden_violations,
    format_trace,
    parse_trace,
    read_trace,
    run_greedy,
    run_greedy_sided,
    run_sgreedy,
    stair_at,
    stair_by_rectangles,
    trace_from_json,
    trace_to_json,
    wings,
    write_trace,
)
from bst_lab.sequences import AccessSequence, gen_preorder, gen_random_permutation, gen_sequential
from bst_lab.trees import InitialTree


def _seq(*keys: int) -> AccessSequence:
    return AccessSequence(keys, max(keys))


def test_greedy_rows_by_hand() -> None:
    trace = run_greedy(_seq(3, 4, 1, 2))
    assert trace.rows == ((3,), (3, 4), (1, 3), (1, 2, 3))
    assert trace.cost == 8
    assert trace.touched_at(4) == (1, 2, 3)


def test_sequential_costs_two_n_minus_one() -> None:
    for n in (1, 2, 5, 64, 300):
        assert run_greedy(gen_sequential(n)).cost == 2 * n - 1


def test_greedy_output_is_satisfied() -> None:
    for seed in range(8):
        trace = run_greedy(gen_random_permutation(15, seed))
        assert is_satisfied_set(trace.touch), f"seed {seed}"


def test_repeated_keys() -> None:
    trace = run_greedy(AccessSequence((2, 1, 2), 2))
    assert trace.rows == ((2,), (1, 2), (2,))
    assert is_satisfied_set(trace.touch)


def test_initial_tree_encoding() -> None:
    tree = InitialTree.from_insertion([2, 1, 3])
    stacks = encode_initial_tree(tree)
    # height 2: the root fills rows -1..0, the leaves row -1 only
    assert stacks.column(2) == (-1, 0)
    assert stacks.column(1) == (-1,)
    assert stacks.column(3) == (-1,)


def test_first_access_touches_the_search_path() -> None:
    rng = np.random.default_rng(3)
    for _ in range(10):
        tree = InitialTree.random(12, rng)
        a = int(rng.integers(1, 13))
        trace = run_greedy(AccessSequence((a,), 12), tree)
        assert trace.rows[0] == tuple(sorted(tree.path(a))), f"tree {tree.format()} key {a}"


def test_greedy_with_initial_tree_is_satisfied_over_stacks() -> None:
    rng = np.random.default_rng(11)
    for seed in range(5):
        tree = InitialTree.random(10, rng)
        trace = run_greedy(gen_random_permutation(10, seed), tree)
        assert is_satisfied_set(trace.combined)


def test_stair_sweep_matches_rectangle_definition() -> None:
    seq = gen_random_permutation(12, 4)
    trace = run_greedy(seq)
    for t, a in enumerate(seq.keys, start=1):
        expected = set(trace.rows[t - 1])
        assert stair_at(trace.touch, seq.n, a, t) == expected
        assert stair_by_rectangles(trace.touch, seq.n, a, t) == expected


def test_state_rejects_outside_keys() -> None:
    state = GreedyState(4)
    with pytest.raises(ValueError):
        state.stair(5)
    with pytest.raises(ValueError):
        GreedyState(3, InitialTree.balanced(4))


def test_sided_variants_touch_one_side() -> None:
    seq = _seq(3, 4, 1, 2)
    left = run_greedy_sided(seq, None, "left")
    right = run_greedy_sided(seq, None, "right")
    for t, a in enumerate(seq.keys, start=1):
        assert all(x <= a for x in left.rows[t - 1])
        assert all(x >= a for x in right.rows[t - 1])
    assert left.algorithm == "greedy-left" and right.algorithm == "greedy-right"
    with pytest.raises(ValueError):
        run_greedy_sided(seq, None, "up")


def test_sgreedy_union() -> None:
    result = run_sgreedy(gen_random_permutation(20, 2))
    assert result.cost == len(result.union)
    assert result.left.touch.points <= result.union.points
    assert result.right.touch.points <= result.union.points
    assert result.cost <= result.left.cost + result.right.cost


def test_sided_and_combined_costs_by_hand() -> None:
    seq = _seq(1, 2)
    assert run_greedy_sided(seq, None, "right").cost == 2
    assert run_greedy_sided(seq, None, "left").cost == 3
    assert run_sgreedy(seq).cost == 3
    for n in (1, 2, 5, 64):
        assert run_sgreedy(gen_sequential(n)).cost == 2 * n - 1


def test_trace_rejects_missing_access() -> None:
    with pytest.raises(ValueError):
        ExecutionTrace(_seq(1, 2), None, ((1,), (1,)))


def test_trace_text_and_json(tmp_path: Path) -> None:
    tree = InitialTree.balanced(6)
    trace = run_greedy(gen_random_permutation(6, 1), tree)

    text = format_trace(trace)
    assert text.startswith(f"# trace alg=greedy n=6 m=6 initial={tree.format()}")
    assert parse_trace(text) == trace
    assert trace_from_json(trace_to_json(trace)) == trace

    path = tmp_path / "run.trace"
    write_trace(trace, path)
    assert read_trace(path) == trace


def test_hidden_elements_hold_on_small_permutations() -> None:
    for perm in itertools.permutations(range(1, 6)):
        seq = AccessSequence(perm, 5)
        for trace in (run_greedy(seq), run_greedy_sided(seq, None, "left"), run_greedy_sided(seq, None, "right")):
            assert find_hidden_violations(trace) == [], f"{trace.algorithm} on {perm}"


def test_hidden_elements_with_balanced_tree() -> None:
    tree = InitialTree.balanced(5)
    for seed in range(20):
        trace = run_greedy(gen_random_permutation(5, seed), tree)
        assert find_hidden_violations(trace) == []


def test_wings_by_hand() -> None:
    left, right = wings(_seq(2, 1, 3))
    assert left == {2: 1, 1: 0, 3: 0}
    assert right == {2: 1, 1: 0, 3: 0}

    left, right = wings(gen_sequential(5))
    assert all(v == 0 for v in left.values())
    assert right == {1: 1, 2: 1, 3: 1, 4: 1, 5: 0}


def test_wing_accounting_on_preorders() -> None:
    for seed in range(10):
        trace = run_greedy(gen_preorder(60, seed))
        report = check_wing_accounting(trace)
        assert report.ok, f"seed {seed}: over budget at {report.over_budget}"
        assert sum(report.touches.values()) == trace.cost
        assert trace.cost <= 4 * 60
    with pytest.raises(ValueError):
        check_wing_accounting(run_greedy(gen_preorder(5, 1), InitialTree.balanced(5)))
