"""
cli.py
~~~~~~
Command-line entry point.  Each subcommand reads its inputs, runs one
operation and maps failures to exit codes: 0 ok, 1 check failed,
2 usage error, 3 resource limit hit.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np
from dotenv import load_dotenv

from bst_lab.decomposition import decompose, format_tree, is_k_decomposable, read_tree, tree_to_json
from bst_lab.geometry import first_unsatisfied, read_grid
from bst_lab.greedy import (
    ExecutionTrace,
    find_gadget_violations,
    format_trace,
    read_trace,
    run_greedy,
    run_greedy_sided,
    run_sgreedy,
    trace_to_json,
)
from bst_lab.opt import OptSearchLimitError, brute_force_opt, decomposition_lower_bound_check
from bst_lab.patterns import avoidance_parameter, contains, parse_gadget, parse_pattern
from bst_lab.regressions import (
    TARGETS,
    WitnessNotFound,
    default_store_path,
    regression_search,
    save_witness,
    verify_store,
)
from bst_lab.rgreedy import run_rgreedy
from bst_lab.sequences import (
    format_sequence,
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
    sequence_to_json,
)
from bst_lab.settings import ResourceLimitError, default_seed, log_level, output_dir, verify_traces
from bst_lab.suites import SUITES, run_suite, write_csv, write_jsonl, write_metrics
from bst_lab.trees import InitialTree

logger = logging.getLogger("bst_lab.cli")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_LIMIT = 3

GEN_CLASSES = (
    "preorder",
    "sequential",
    "k-increasing",
    "k-decomposable",
    "uniform-decomposable",
    "perturbed-grid",
    "cole",
    "path-preorder",
    "random",
    "alternating",
    "avoiding",
)


def _emit(text: str, path: str | None) -> None:
    if path and path != "-":
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
        logger.info("Wrote %s", path)
    else:
        sys.stdout.write(text)


def _seed(args) -> int:
    return args.seed if args.seed is not None else default_seed()


def _initial_tree(spec: str, n: int, seed: int) -> InitialTree | None:
    spec = spec.strip().lower()
    if spec == "none":
        return None
    if spec == "balanced":
        return InitialTree.balanced(n)
    if spec == "random":
        return InitialTree.random(n, np.random.default_rng(seed))
    tree = InitialTree.parse(spec)
    if tree.n != n:
        raise ValueError(f"Initial tree has {tree.n} keys, the input has n={n}")
    return tree


# ── gen ───────────────────────────────────────────────────────────────────────

def cmd_gen(args) -> int:
    n, k, seed = args.n, args.k, _seed(args)
    tree = None
    if args.input_class == "preorder":
        seq = gen_preorder(n, seed)
    elif args.input_class == "sequential":
        seq = gen_sequential(n)
    elif args.input_class == "k-increasing":
        seq = gen_k_increasing(n, k or 3, seed)
    elif args.input_class == "k-decomposable":
        seq, tree = gen_k_decomposable(n, k or 2, seed)
    elif args.input_class == "uniform-decomposable":
        template = parse_pattern(args.pattern or "2,4,1,3").to_permutation()
        seq, tree = gen_uniform_decomposable(template, args.depth)
    elif args.input_class == "perturbed-grid":
        side = math.isqrt(n)
        if side * side != n:
            raise ValueError(f"Perturbed grids need a square n, got {n}")
        seq = gen_perturbed_grid(side)
    elif args.input_class == "cole":
        seq, tree = gen_cole_showcase(n, seed)
    elif args.input_class == "path-preorder":
        seq = gen_path_preorder(n, seed)
    elif args.input_class == "random":
        seq = gen_random_permutation(n, seed)
    elif args.input_class == "alternating":
        seq = gen_alternating(n)
    else:
        if not args.pattern:
            raise ValueError("--class avoiding needs --pattern")
        seq = gen_avoiding(parse_pattern(args.pattern).to_permutation(), n, seed)

    _emit(sequence_to_json(seq) + "\n" if args.json else format_sequence(seq), args.output)
    if args.tree_out:
        if tree is None:
            raise ValueError(f"--class {args.input_class} does not produce a decomposition tree")
        Path(args.tree_out).write_text(tree_to_json(tree) + "\n" if args.json else format_tree(tree) + "\n")
    return EXIT_OK


# ── run ───────────────────────────────────────────────────────────────────────

def _check_satisfied(trace: ExecutionTrace) -> bool:
    rect = first_unsatisfied(trace.combined)
    if rect is not None:
        logger.error("%s trace is not satisfied: %s - %s", trace.algorithm, tuple(rect.p), tuple(rect.q))
        return False
    return True


def cmd_run(args) -> int:
    seq = read_sequence(args.input)
    initial = _initial_tree(args.initial, seq.n, _seed(args))
    verify = verify_traces() and not args.no_verify

    if args.alg == "sgreedy":
        result = run_sgreedy(seq, initial)
        if args.emit_trace:
            sides = (result.left, result.right)
            _emit("".join(trace_to_json(s) + "\n" if args.json else format_trace(s) for s in sides), args.output)
        print(f"cost {result.cost} left {result.left.cost} right {result.right.cost}")
        return EXIT_OK

    if args.alg == "rgreedy":
        tree = read_tree(args.tree) if args.tree else decompose(seq.keys)
        trace = run_rgreedy(seq, tree, initial)
    elif args.alg == "greedy":
        trace = run_greedy(seq, initial)
    else:
        trace = run_greedy_sided(seq, initial, "left" if args.alg == "greedy-left" else "right")

    if args.emit_trace:
        _emit(trace_to_json(trace) + "\n" if args.json else format_trace(trace), args.output)
    print(f"cost {trace.cost}")
    # sided traces are not satisfied in general
    if verify and args.alg in ("greedy", "rgreedy") and not _check_satisfied(trace):
        return EXIT_FAILED
    return EXIT_OK


# ── verify ────────────────────────────────────────────────────────────────────

def cmd_verify(args) -> int:
    grid = read_trace(args.trace).combined if args.trace else read_grid(args.grid)
    rect = first_unsatisfied(grid)
    if rect is None:
        print(f"satisfied ({len(grid)} points)")
        return EXIT_OK
    print(f"unsatisfied: ({rect.p.x},{rect.p.y}) ({rect.q.x},{rect.q.y})")
    return EXIT_FAILED


# ── decompose ─────────────────────────────────────────────────────────────────

def cmd_decompose(args) -> int:
    seq = read_sequence(args.input)
    if args.k is None:
        tree = decompose(seq.keys)
    else:
        ok, tree = is_k_decomposable(seq.keys, args.k)
        if not ok:
            print(f"not {args.k}-decomposable")
            return EXIT_FAILED
    _emit(tree_to_json(tree) + "\n" if args.json else format_tree(tree) + "\n", args.output)
    return EXIT_OK


# ── pattern ───────────────────────────────────────────────────────────────────

def cmd_pattern(args) -> int:
    if args.avoidance is not None:
        seq = read_sequence(args.input)
        print(avoidance_parameter(seq.keys, args.avoidance))
        return EXIT_OK

    if args.gadget:
        if not args.trace:
            raise ValueError("--gadget checks a trace; pass --trace")
        trace = read_trace(args.trace)
        hits = find_gadget_violations(trace, parse_gadget(args.gadget), args.mode, args.k)
        for box in hits:
            print(f"violation [{box.xmin},{box.xmax}]x[{box.ymin},{box.ymax}]")
        print(f"{len(hits)} violation(s)")
        return EXIT_FAILED if hits else EXIT_OK

    if not args.pattern:
        raise ValueError("Pass --pattern, --gadget or --avoidance")
    needle = parse_pattern(args.pattern)
    haystack = read_trace(args.trace).touch if args.trace else read_sequence(args.input).keys
    occurrence = contains(haystack, needle)
    if occurrence is None:
        print("avoids")
    else:
        points = sorted(occurrence.values(), key=lambda p: (p.y, p.x))
        print("contains " + " ".join(f"({p.x},{p.y})" for p in points))
    return EXIT_OK


# ── opt ───────────────────────────────────────────────────────────────────────

def cmd_opt(args) -> int:
    seq = read_sequence(args.input)
    try:
        if args.lower_bound:
            tree = read_tree(args.tree) if args.tree else decompose(seq.keys)
            check = decomposition_lower_bound_check(seq, tree)
            print(f"opt {check.opt_whole} block_sum {check.block_sum} rhs {check.rhs} holds {check.holds}")
            return EXIT_OK if check.holds else EXIT_FAILED
        result = brute_force_opt(seq, boundary_only=not args.unrestricted)
    except OptSearchLimitError as exc:
        print(f"opt <= {exc.best.cost} (inexact: {exc})")
        return EXIT_LIMIT
    if args.json:
        print(result.model_dump_json())
    else:
        print(f"opt {result.cost} nodes {result.nodes}")
    return EXIT_OK


# ── experiment ────────────────────────────────────────────────────────────────

def cmd_experiment(args) -> int:
    fmt = "jsonl" if args.json else args.out
    records = run_suite(args.suite, args.n, args.k, args.seeds, args.seed, workers=args.workers)
    output = args.output or str(output_dir() / f"{args.suite}.{fmt}")
    if output == "-":
        stream = sys.stdout
        (write_jsonl if fmt == "jsonl" else write_csv)(records, stream)
    else:
        Path(output).parent.mkdir(parents=True, exist_ok=True)
        with open(output, "w", newline="") as fh:
            (write_jsonl if fmt == "jsonl" else write_csv)(records, fh)
        logger.info("Wrote %d records to %s", len(records), output)
    if args.metrics_out:
        write_metrics(records, args.metrics_out)
    failed = sum(1 for r in records if not r.passed)
    return EXIT_FAILED if failed else EXIT_OK


# ── regress ───────────────────────────────────────────────────────────────────

def cmd_regress(args) -> int:
    if args.verify:
        results = verify_store(args.verify)
        for target, ok in results.items():
            print(f"{target}: {'ok' if ok else 'FAILED'}")
        return EXIT_OK if all(results.values()) else EXIT_FAILED
    if not args.target:
        raise ValueError("Pass --target or --verify")
    try:
        witness = regression_search(args.target, args.max_n, args.size)
    except WitnessNotFound as exc:
        logger.error("%s", exc)
        return EXIT_FAILED
    save_witness(witness, args.store or default_store_path())
    print(witness.model_dump_json())
    return EXIT_OK


# ── parser ────────────────────────────────────────────────────────────────────

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="Log at DEBUG level")
    common.add_argument("--seed", type=int, help="Seed (default: BST_LAB_SEED or 1)")
    common.add_argument("--json", action="store_true", help="JSON instead of the text format")
    common.add_argument("--node-cap", type=int, help="OPT search node cap (BST_LAB_NODE_CAP)")
    common.add_argument("--gadget-node-cap", type=int, help="Containment node cap (BST_LAB_GADGET_NODE_CAP)")
    common.add_argument("--time-cap-ms", type=int, help="Wall-clock cap per OPT search (BST_LAB_TIME_CAP_MS)")

    p = argparse.ArgumentParser(prog="bst-lab", description="Geometric BST lab: Greedy, RGreedy, patterns and OPT")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="Generate an access sequence")
    g.add_argument("--class", dest="input_class", choices=GEN_CLASSES, required=True)
    g.add_argument("--n", type=int, required=True, help="Number of keys (a square for perturbed-grid)")
    g.add_argument("--k", type=int, help="k for k-increasing / k-decomposable")
    g.add_argument("--pattern", help="Avoided pattern, or the template of uniform-decomposable (e.g. 2,4,1,3)")
    g.add_argument("--depth", type=int, default=2, help="Depth of uniform-decomposable trees")
    g.add_argument("--tree-out", help="Also write the decomposition tree here")
    g.add_argument("--output", help="Output path (default: stdout)")
    g.set_defaults(handler=cmd_gen)

    r = sub.add_parser("run", parents=[common], help="Run an algorithm on a sequence")
    r.add_argument("--alg", choices=("greedy", "greedy-left", "greedy-right", "sgreedy", "rgreedy"), default="greedy")
    r.add_argument("--input", required=True, help="Sequence file")
    r.add_argument("--initial", default="none", help="none, balanced, random, or a preorder like 2,1,3")
    r.add_argument("--tree", help="Decomposition tree file for rgreedy (default: canonical)")
    r.add_argument("--emit-trace", action="store_true", help="Print the execution trace")
    r.add_argument("--no-verify", action="store_true", help="Skip the satisfaction check")
    r.add_argument("--output", help="Trace output path (default: stdout); sgreedy writes its left then right trace")
    r.set_defaults(handler=cmd_run)

    v = sub.add_parser("verify", parents=[common], help="Check a point set or trace for satisfaction")
    src = v.add_mutually_exclusive_group(required=True)
    src.add_argument("--grid", help="Point-set file")
    src.add_argument("--trace", help="Trace file")
    v.set_defaults(handler=cmd_verify)

    d = sub.add_parser("decompose", parents=[common], help="Decomposition tree of a permutation")
    d.add_argument("--input", required=True)
    d.add_argument("--k", type=int, help="Require arity <= k")
    d.add_argument("--output")
    d.set_defaults(handler=cmd_decompose)

    pt = sub.add_parser("pattern", parents=[common], help="Pattern containment and gadget checks")
    pt.add_argument("--input", help="Sequence file")
    pt.add_argument("--trace", help="Trace file (searches its touch points)")
    pt.add_argument("--pattern", help="Permutation pattern, e.g. 3,2,1")
    pt.add_argument("--gadget", help="cap, inc:k, dec:k or alt:k")
    pt.add_argument("--mode", choices=("capture", "increasing", "decreasing", "alternating"), default="capture")
    pt.add_argument("--k", type=int, help="k for the monotone and alternating modes")
    pt.add_argument("--avoidance", type=int, metavar="K_MAX", help="Print the avoidance parameter")
    pt.set_defaults(handler=cmd_pattern)

    o = sub.add_parser("opt", parents=[common], help="Exact OPT for small inputs")
    o.add_argument("--input", required=True)
    o.add_argument("--unrestricted", action="store_true", help="Branch on every cell of the rectangle")
    o.add_argument("--lower-bound", action="store_true", help="Check OPT against the block sum minus 2n")
    o.add_argument("--tree", help="Decomposition tree file for --lower-bound (default: canonical)")
    o.set_defaults(handler=cmd_opt)

    e = sub.add_parser("experiment", parents=[common], help="Run an experiment suite")
    e.add_argument("--suite", choices=sorted(SUITES), required=True)
    e.add_argument("--n", type=int, nargs="+", help="Sizes (default: the suite's)")
    e.add_argument("--k", type=int, nargs="+", help="k values (default: the suite's)")
    e.add_argument("--seeds", type=int, help="Seeds per (n, k), or inputs per n for exhaustive suites")
    e.add_argument("--out", choices=("csv", "jsonl"), default="csv")
    e.add_argument("--output", help="Output path, '-' for stdout (default: BST_LAB_OUTPUT_DIR/<suite>.<fmt>)")
    e.add_argument("--workers", type=int, default=1)
    e.add_argument("--metrics-out", help="Write a Prometheus textfile here")
    e.set_defaults(handler=cmd_experiment)

    rg = sub.add_parser("regress", parents=[common], help="Counterexample searches and their fixtures")
    rg.add_argument("--target", choices=TARGETS)
    rg.add_argument("--store", help="Witness JSON (default: BST_LAB_OUTPUT_DIR/regressions.json)")
    rg.add_argument("--verify", metavar="PATH", help="Re-verify stored witnesses")
    rg.add_argument("--max-n", type=int)
    rg.add_argument("--size", type=int, default=2, help="Pattern size for gadget-counter boxes")
    rg.set_defaults(handler=cmd_regress)
    return p


def _apply_limits(args) -> None:
    for flag, env in (
        ("node_cap", "BST_LAB_NODE_CAP"),
        ("gadget_node_cap", "BST_LAB_GADGET_NODE_CAP"),
        ("time_cap_ms", "BST_LAB_TIME_CAP_MS"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            # worker processes read limits from the environment
            os.environ[env] = str(value)


def main(argv=None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else getattr(logging, log_level(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
        datefmt="%Y-%m-%dT%H:%M:%S",
        stream=sys.stderr,
    )
    _apply_limits(args)

    try:
        return args.handler(args)
    except ResourceLimitError as exc:
        logger.error("Resource limit: %s", exc)
        return EXIT_LIMIT
    except (ValueError, FileNotFoundError) as exc:
        logger.error("%s", exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
