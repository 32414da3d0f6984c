"""
suites.py
~~~~~~~~~
Batch experiment suites.  Each suite turns a (n, k, seed) task into one or
more ExperimentRecords carrying a measured cost, the bound it is held to
and whether the check passed.  Tasks are independent, so they can fan out
over a process pool; records are sorted before they are written.

Exhaustive suites reuse the seed column as the index of the input
permutation in lexicographic order.

Every record reads ``cost <= rhs`` when it has a bound.  For the OPT lower
bound that means the block sum goes into ``cost`` and OPT into ``rhs``.
"""

from __future__ import annotations

import csv
import functools
import itertools
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, TextIO

import numpy as np
from prometheus_client import CollectorRegistry, Counter, Histogram, write_to_textfile
from pydantic import BaseModel, ConfigDict, Field, model_validator

from bst_lab.decomposition import decompose, enumerate_simple, is_k_decomposable
from bst_lab.geometry import is_satisfied_set
from bst_lab.greedy import (
    check_wing_accounting,
    find_gadget_violations,
    find_hidden_violations,
    run_greedy,
    run_greedy_sided,
)
from bst_lab.opt import (
    decomposition_lower_bound_check,
    hardness_survey,
    merge_sequence,
    split_satisfied_construction,
    split_sequence,
)
from bst_lab.patterns import CAP, PatternMatrix, alt, contains, inc, tensor
from bst_lab.rgreedy import decomposition_bound
from bst_lab.sequences import (
    AccessSequence,
    gen_avoiding,
    gen_cole_showcase,
    gen_k_decomposable,
    gen_perturbed_grid,
    gen_preorder,
    gen_random_permutation,
    gen_sequential,
)
from bst_lab.settings import default_seed
from bst_lab.trees import InitialTree

logger = logging.getLogger(__name__)

CSV_FIELDS = ("suite", "alg", "class", "n", "k", "seed", "cost", "rhs", "pass", "ms")


class ExperimentRecord(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    suite: str
    alg: str
    input_class: str = Field(alias="class")
    n: int
    k: int = 0
    seed: int
    cost: int | float
    rhs: int | float | None = None
    passed: bool = Field(alias="pass")
    ms: float = 0.0

    @model_validator(mode="after")
    def _pass_within_bound(self) -> "ExperimentRecord":
        if self.passed and self.rhs is not None and self.cost > self.rhs:
            raise ValueError(f"Record marked as passing with cost {self.cost} above its bound {self.rhs}")
        return self

    def sort_key(self) -> tuple:
        return (self.suite, self.alg, self.input_class, self.n, self.k, self.seed)


@dataclass(frozen=True)
class Task:
    suite: str
    n: int
    k: int
    seed: int


SuiteFn = Callable[[Task], list[ExperimentRecord]]


@dataclass(frozen=True)
class Suite:
    name: str
    run: SuiteFn
    ns: tuple[int, ...]
    ks: tuple[int, ...] = (0,)
    seeds: int = 1
    exhaustive: bool = False


SUITES: dict[str, Suite] = {}


def _suite(name: str, ns: tuple[int, ...], ks: tuple[int, ...] = (0,), seeds: int = 1, exhaustive: bool = False):
    def register(fn: SuiteFn) -> SuiteFn:
        SUITES[name] = Suite(name, fn, ns, ks, seeds, exhaustive)
        return fn

    return register


def _record(
    task: Task,
    alg: str,
    input_class: str,
    cost: int | float,
    rhs: int | float | None = None,
    passed: bool | None = None,
) -> ExperimentRecord:
    if passed is None:
        passed = rhs is None or cost <= rhs
    return ExperimentRecord(
        suite=task.suite,
        alg=alg,
        input_class=input_class,
        n=task.n,
        k=task.k,
        seed=task.seed,
        cost=cost,
        rhs=rhs,
        passed=passed,
    )


def nth_permutation(n: int, index: int) -> tuple[int, ...]:
    """The ``index``-th permutation of 1..n in lexicographic order."""
    if not 0 <= index < math.factorial(n):
        raise ValueError(f"Permutation index {index} out of range for n={n}")
    pool = list(range(1, n + 1))
    out = []
    for i in range(n, 0, -1):
        digit, index = divmod(index, math.factorial(i - 1))
        out.append(pool.pop(digit))
    return tuple(out)


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


# ──────────────────────────────────────────────────────────────────────────────
# Suites
# ──────────────────────────────────────────────────────────────────────────────

@_suite("preorder-bound", ns=(16, 64, 256, 1024), seeds=500)
def _preorder_bound(task: Task) -> list[ExperimentRecord]:
    trace = run_greedy(gen_preorder(task.n, task.seed))
    return [_record(task, "greedy", "preorder", trace.cost, 4 * task.n)]


@_suite("sequential", ns=(1, 8, 64, 512, 4096))
def _sequential(task: Task) -> list[ExperimentRecord]:
    cost = run_greedy(gen_sequential(task.n)).cost
    rhs = 2 * task.n - 1
    return [_record(task, "greedy", "sequential", cost, rhs, passed=cost == rhs)]


@_suite("decomp-theorem", ns=(256, 1024, 4096), ks=(2, 3, 4), seeds=50)
def _decomp_theorem(task: Task) -> list[ExperimentRecord]:
    seq, tree = gen_k_decomposable(task.n, task.k, task.seed)
    bound = decomposition_bound(seq, tree)
    feasible = is_satisfied_set(bound.trace.touch)
    if not feasible:
        logger.warning("RGreedy trace is not satisfied (n=%d k=%d seed=%d)", task.n, task.k, task.seed)
    return [
        _record(task, "rgreedy", "k-decomposable", bound.lhs, bound.rhs, passed=bound.holds and feasible)
    ]


_SIDED_GADGETS = {
    "greedy": CAP,
    "greedy-right": PatternMatrix.from_permutation((1, 2)),
    "greedy-left": PatternMatrix.from_permutation((2, 1)),
}


@_suite("input-revealing", ns=(24,), seeds=100)
def _input_revealing(task: Task) -> list[ExperimentRecord]:
    out = []
    for pattern in itertools.permutations((1, 2, 3)):
        seq = gen_avoiding(pattern, task.n, task.seed)
        tree = InitialTree.random(task.n, _rng(task.seed))
        label = "avoid-" + ",".join(map(str, pattern))
        for alg, g in _SIDED_GADGETS.items():
            if alg == "greedy":
                trace = run_greedy(seq, tree)
            else:
                trace = run_greedy_sided(seq, tree, "right" if alg == "greedy-right" else "left")
            found = contains(trace.touch, tensor(PatternMatrix.from_permutation(pattern), g))
            out.append(_record(task, alg, label, int(found is not None), 0))
    return out


@_suite("gadget-capture", ns=(32,), seeds=100)
def _gadget_capture(task: Task) -> list[ExperimentRecord]:
    seq = gen_random_permutation(task.n, task.seed)
    out = []
    for label, tree in (("random", None), ("random+tree", InitialTree.random(task.n, _rng(task.seed)))):
        trace = run_greedy(seq, tree)
        hits = find_gadget_violations(trace, CAP, "capture")
        out.append(_record(task, "greedy", f"{label}:cap", len(hits), 0))
        for k in (1, 2, 3):
            hits = find_gadget_violations(trace, inc(k + 1), "increasing", k)
            out.append(_record(task, "greedy", f"{label}:inc{k + 1}", len(hits), 0))
    # every other seed, so 100 seeds give 50 decomposable inputs
    if task.seed % 2 == 0:
        dseq, _ = gen_k_decomposable(min(task.n, 16), 2, task.seed)
        hits = find_gadget_violations(run_greedy(dseq), alt(6), "capture")
        out.append(_record(task, "greedy", "2-decomposable:alt6", len(hits), 0))
    return out


@_suite("opt-decomp", ns=(5,), exhaustive=True)
def _opt_decomp(task: Task) -> list[ExperimentRecord]:
    seq = AccessSequence(nth_permutation(task.n, task.seed), task.n)
    check = decomposition_lower_bound_check(seq, decompose(seq.keys))
    return [_record(task, "opt", "permutation", check.rhs, check.opt_whole, passed=check.holds)]


@_suite("split-construction", ns=(8,), seeds=200)
def _split_construction(task: Task) -> list[ExperimentRecord]:
    rng = _rng(task.seed)
    m = int(rng.integers(2, 13))
    keys = [int(x) for x in rng.integers(1, task.n + 1, size=m)]
    if len(set(keys)) == m:
        keys[-1] = keys[0]
    seq = AccessSequence(tuple(keys), task.n)
    greedy = run_greedy(seq).touch
    split = split_sequence(seq)
    built = split_satisfied_construction(seq, greedy)
    rhs = 2 * len(greedy) + 2 * m
    ok = (
        is_satisfied_set(built)
        and split.sequence.access_grid().points <= built.points
        and len(built) <= rhs
        and merge_sequence(split) == seq
    )
    return [_record(task, "greedy", "repeated", len(built), rhs, passed=ok)]


@functools.lru_cache(maxsize=None)
def _simple_patterns(size: int) -> tuple[PatternMatrix, ...]:
    return tuple(PatternMatrix.from_permutation(p) for p in enumerate_simple(size))


@_suite("decomposability", ns=(6,), ks=(2, 3, 4), exhaustive=True)
def _decomposability(task: Task) -> list[ExperimentRecord]:
    perm = nth_permutation(task.n, task.seed)
    decomposable, _ = is_k_decomposable(perm, task.k)
    avoids = all(
        contains(perm, p) is None for size in (task.k + 1, task.k + 2) for p in _simple_patterns(size)
    )
    return [_record(task, "decompose", "permutation", int(decomposable), passed=decomposable == avoids)]


@_suite("perturbed-grid", ns=(9, 64, 256, 1024))
def _perturbed_grid(task: Task) -> list[ExperimentRecord]:
    side = math.isqrt(task.n)
    if side * side != task.n:
        raise ValueError(f"Perturbed grids need a square n, got {task.n}")
    trace = run_greedy(gen_perturbed_grid(side))
    out = [_record(task, "greedy", "perturbed-grid", trace.cost, 6 * task.n)]
    if side == 3:
        seen = sum(
            contains(trace.touch, PatternMatrix.from_permutation(p)) is not None
            for p in itertools.permutations((1, 2, 3))
        )
        out.append(_record(task, "greedy", "perturbed-grid:s3-patterns", seen, passed=seen == 6))
    return out


@functools.lru_cache(maxsize=None)
def _balanced_shapes(n: int) -> tuple[InitialTree, ...]:
    return tuple(t for t in InitialTree.all_shapes(n) if t.height == n.bit_length())


@_suite("hidden-element", ns=(1, 2, 3, 4, 5, 6, 7), exhaustive=True)
def _hidden_element(task: Task) -> list[ExperimentRecord]:
    seq = AccessSequence(nth_permutation(task.n, task.seed), task.n)
    out = []
    trees: list[tuple[str, InitialTree | None]] = [("empty", None)]
    if task.n <= 5:
        trees += [("balanced", t) for t in _balanced_shapes(task.n)]
    for label, tree in trees:
        traces = [
            run_greedy(seq, tree),
            run_greedy_sided(seq, tree, "left"),
            run_greedy_sided(seq, tree, "right"),
        ]
        for trace in traces:
            hits = find_hidden_violations(trace)
            cls = label if tree is None else f"{label}:{tree.format()}"
            out.append(_record(task, trace.algorithm, cls, len(hits), 0))
    return out


@_suite("wings", ns=(16, 64, 256), seeds=100)
def _wings(task: Task) -> list[ExperimentRecord]:
    report = check_wing_accounting(run_greedy(gen_preorder(task.n, task.seed)))
    cost = sum(report.touches.values())
    return [_record(task, "greedy", "preorder", cost, report.total + 2 * task.n, passed=report.ok)]


@_suite("cole", ns=(1280,), seeds=10)
def _cole(task: Task) -> list[ExperimentRecord]:
    seq, tree = gen_cole_showcase(task.n, task.seed)
    bound = decomposition_bound(seq, tree)
    logger.info("cole n=%d seed=%d: rgreedy/n = %.3f", task.n, task.seed, bound.lhs / task.n)
    return [_record(task, "rgreedy", "cole", bound.lhs, bound.rhs, passed=bound.holds)]


@_suite("hardness", ns=(512,), seeds=100)
def _hardness(task: Task) -> list[ExperimentRecord]:
    summary = hardness_survey(task.n, samples=1, seed=task.seed)
    value = summary.values[0]
    if summary.mode == "exact":
        return [_record(task, "opt", "random", value)]
    return [_record(task, "sgreedy", "random", value, 5.0, passed=0 < value <= 5.0)]


# ──────────────────────────────────────────────────────────────────────────────
# Runner
# ──────────────────────────────────────────────────────────────────────────────

def get_suite(name: str) -> Suite:
    if name not in SUITES:
        raise ValueError(f"Unknown suite {name!r}; expected one of {', '.join(sorted(SUITES))}")
    return SUITES[name]


def build_tasks(
    name: str,
    ns: Iterable[int] | None = None,
    ks: Iterable[int] | None = None,
    seeds: int | None = None,
    seed: int | None = None,
) -> list[Task]:
    """
    Expand a suite into tasks.  Random suites draw ``seeds`` consecutive
    seeds starting at ``seed``; exhaustive suites walk S_n and stop after
    ``seeds`` inputs when it is given.
    """
    suite = get_suite(name)
    ns = tuple(ns or suite.ns)
    ks = tuple(ks or suite.ks)
    if any(n < 1 for n in ns):
        raise ValueError(f"Sizes must be positive, got {ns}")
    first = seed if seed is not None else default_seed()
    tasks = []
    for n, k in itertools.product(ns, ks):
        if suite.exhaustive:
            count = math.factorial(n) if seeds is None else min(seeds, math.factorial(n))
            tasks += [Task(name, n, k, i) for i in range(count)]
        else:
            count = seeds if seeds is not None else suite.seeds
            tasks += [Task(name, n, k, s) for s in range(first, first + count)]
    return tasks


def run_task(task: Task) -> list[ExperimentRecord]:
    start = time.perf_counter()
    records = get_suite(task.suite).run(task)
    ms = (time.perf_counter() - start) * 1000.0
    logger.debug("%s n=%d k=%d seed=%d took %.1f ms", task.suite, task.n, task.k, task.seed, ms)
    return [r.model_copy(update={"ms": ms}) for r in records]


def run_suite(
    name: str,
    ns: Iterable[int] | None = None,
    ks: Iterable[int] | None = None,
    seeds: int | None = None,
    seed: int | None = None,
    workers: int = 1,
) -> list[ExperimentRecord]:
    tasks = build_tasks(name, ns, ks, seeds, seed)
    logger.info("Suite %s: %d tasks on %d worker(s)", name, len(tasks), workers)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(run_task, tasks, chunksize=max(1, len(tasks) // (workers * 8))))
    else:
        batches = [run_task(t) for t in tasks]
    records = sorted((r for batch in batches for r in batch), key=ExperimentRecord.sort_key)
    failed = [r for r in records if not r.passed]
    for r in failed[:10]:
        logger.warning(
            "%s %s %s n=%d k=%d seed=%d failed: cost=%s rhs=%s",
            r.suite, r.alg, r.input_class, r.n, r.k, r.seed, r.cost, r.rhs,
        )
    logger.info("Suite %s finished: %d records, %d failed", name, len(records), len(failed))
    return records


# ──────────────────────────────────────────────────────────────────────────────
# Output
# ──────────────────────────────────────────────────────────────────────────────

def _csv_value(field: str, value: object) -> str:
    if value is None:
        return ""
    if field == "pass":
        return "true" if value else "false"
    if field == "ms":
        return f"{value:.3f}"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def write_csv(records: Iterable[ExperimentRecord], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for r in records:
        row = r.model_dump(by_alias=True)
        writer.writerow([_csv_value(f, row[f]) for f in CSV_FIELDS])


def write_jsonl(records: Iterable[ExperimentRecord], stream: TextIO) -> None:
    for r in records:
        stream.write(r.model_dump_json(by_alias=True) + "\n")


def write_metrics(records: Iterable[ExperimentRecord], path: str | Path) -> None:
    """Prometheus textfile with record counts per outcome and per-record wall time."""
    registry = CollectorRegistry()
    total = Counter(
        "bst_lab_records",
        "Experiment records by suite and outcome",
        ["suite", "passed"],
        registry=registry,
    )
    seconds = Histogram(
        "bst_lab_record_seconds",
        "Wall time of the task that produced each record",
        ["suite"],
        buckets=(0.001, 0.005, 0.01, 0.05, 0.1, 0.5, 1, 5, 10, 60),
        registry=registry,
    )
    for r in records:
        total.labels(r.suite, "true" if r.passed else "false").inc()
        seconds.labels(r.suite).observe(r.ms / 1000.0)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    write_to_textfile(str(path), registry)
