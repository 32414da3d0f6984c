import io
import itertools
from pathlib import Path

import pytest
from pydantic import ValidationError

from bst_lab.suites import (
    CSV_FIELDS,
    SUITES,
    ExperimentRecord,
    build_tasks,
    nth_permutation,
    run_suite,
    write_csv,
    write_jsonl,
    write_metrics,
)

# reduced runs: (suite, ns, ks, seeds)
_SMALL_RUNS = [
    ("preorder-bound", (16,), None, 3),
    ("sequential", (1, 8), None, None),
    ("decomp-theorem", (32,), (2, 3), 2),
    ("input-revealing", (10,), None, 1),
    ("gadget-capture", (12,), None, 2),
    ("opt-decomp", (4,), None, 24),
    ("split-construction", (8,), None, 5),
    ("decomposability", (5,), (2,), 30),
    ("perturbed-grid", (9,), None, None),
    ("hidden-element", (3,), None, None),
    ("wings", (16,), None, 3),
    ("cole", (1280,), None, 1),
    ("hardness", (64,), None, 2),
]


def test_every_suite_has_a_small_run() -> None:
    assert {name for name, *_ in _SMALL_RUNS} == set(SUITES)


@pytest.mark.parametrize("name,ns,ks,seeds", _SMALL_RUNS, ids=[r[0] for r in _SMALL_RUNS])
def test_small_suite_runs_pass(name: str, ns: tuple[int, ...], ks: tuple[int, ...] | None, seeds: int | None) -> None:
    records = run_suite(name, ns, ks, seeds, seed=0)
    assert records
    failed = [r for r in records if not r.passed]
    assert failed == [], failed[:3]
    assert records == sorted(records, key=ExperimentRecord.sort_key)
    assert all(r.suite == name and r.ms >= 0 for r in records)


def test_record_counts() -> None:
    assert len(run_suite("input-revealing", (8,), None, 1, seed=0)) == 18
    # the even seed adds the decomposable alt6 record
    assert len(run_suite("gadget-capture", (10,), None, 2, seed=0)) == 8 + 8 + 1
    assert len(run_suite("perturbed-grid", (9,))) == 2


def test_build_tasks() -> None:
    assert len(build_tasks("hidden-element", ns=[3])) == 6
    assert [t.seed for t in build_tasks("hidden-element", ns=[4], seeds=5)] == [0, 1, 2, 3, 4]
    assert [t.seed for t in build_tasks("wings", ns=[16], seeds=3, seed=10)] == [10, 11, 12]
    tasks = build_tasks("decomp-theorem", ns=[64], seeds=2, seed=1)
    assert {(t.k, t.seed) for t in tasks} == {(k, s) for k in (2, 3, 4) for s in (1, 2)}
    with pytest.raises(ValueError):
        build_tasks("no-such-suite")
    with pytest.raises(ValueError):
        build_tasks("wings", ns=[0])


def test_nth_permutation_is_lexicographic() -> None:
    assert [nth_permutation(4, i) for i in range(24)] == list(itertools.permutations(range(1, 5)))
    with pytest.raises(ValueError):
        nth_permutation(3, 6)


def test_record_validation_and_aliases() -> None:
    with pytest.raises(ValidationError):
        ExperimentRecord(suite="s", alg="greedy", input_class="x", n=4, seed=0, cost=9, rhs=8, passed=True)
    record = ExperimentRecord.model_validate(
        {"suite": "s", "alg": "greedy", "class": "x", "n": 4, "seed": 0, "cost": 7, "rhs": 8, "pass": True}
    )
    assert record.input_class == "x" and record.passed


def test_parallel_run_matches_serial() -> None:
    serial = run_suite("sequential", (8, 16, 32))
    parallel = run_suite("sequential", (8, 16, 32), workers=2)
    assert [(r.n, r.cost) for r in serial] == [(r.n, r.cost) for r in parallel]


def test_output_formats(tmp_path: Path) -> None:
    records = run_suite("sequential", (1, 8))

    out = io.StringIO()
    write_csv(records, out)
    lines = out.getvalue().splitlines()
    assert lines[0] == ",".join(CSV_FIELDS)
    assert lines[1].startswith("sequential,greedy,sequential,1,0,")
    assert ",1,1,true," in lines[1]

    out = io.StringIO()
    write_jsonl(records, out)
    rows = [ExperimentRecord.model_validate_json(line) for line in out.getvalue().splitlines()]
    assert [r.cost for r in rows] == [1, 15]

    metrics = tmp_path / "metrics" / "bst_lab.prom"
    write_metrics(records, metrics)
    text = metrics.read_text()
    assert 'bst_lab_records_total{suite="sequential",passed="true"} 2.0' in text
    assert "bst_lab_record_seconds_bucket" in text
