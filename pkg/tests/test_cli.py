from pathlib import Path

import pytest

from bst_lab.cli import EXIT_FAILED, EXIT_LIMIT, EXIT_OK, EXIT_USAGE, main
from bst_lab.decomposition import read_tree
from bst_lab.geometry import PointGrid, write_grid
from bst_lab.greedy import trace_from_json
from bst_lab.sequences import AccessSequence, read_sequence, write_sequence

ASSETS = Path(__file__).parent / "assets"


def _sequence_file(tmp_path: Path, *keys: int) -> str:
    path = tmp_path / "input.seq"
    write_sequence(AccessSequence(keys, max(keys)), path)
    return str(path)


def test_gen_writes_sequences_and_trees(tmp_path: Path) -> None:
    out = tmp_path / "seq.txt"
    assert main(["gen", "--class", "sequential", "--n", "5", "--output", str(out)]) == EXIT_OK
    assert read_sequence(out).keys == (1, 2, 3, 4, 5)

    tree_out = tmp_path / "tree.txt"
    args = ["gen", "--class", "k-decomposable", "--n", "20", "--k", "3", "--seed", "4"]
    assert main(args + ["--output", str(out), "--tree-out", str(tree_out)]) == EXIT_OK
    assert read_tree(tree_out).sequence == read_sequence(out).keys


def test_gen_rejects_bad_requests(tmp_path: Path) -> None:
    assert main(["gen", "--class", "perturbed-grid", "--n", "10"]) == EXIT_USAGE
    assert main(["gen", "--class", "avoiding", "--n", "10"]) == EXIT_USAGE
    with pytest.raises(SystemExit) as info:
        main(["gen", "--class", "zigzag", "--n", "4"])
    assert info.value.code == 2


def test_run_prints_cost(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    seq = _sequence_file(tmp_path, 3, 4, 1, 2)
    assert main(["run", "--input", seq]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "cost 8"

    assert main(["run", "--input", seq, "--alg", "sgreedy"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("cost ")

    assert main(["run", "--input", seq, "--alg", "rgreedy", "--initial", "balanced"]) == EXIT_USAGE


def test_run_trace_then_verify(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    seq = _sequence_file(tmp_path, 2, 4, 1, 3)
    trace = tmp_path / "run.trace"
    args = ["run", "--input", seq, "--initial", "2,1,3,4", "--emit-trace", "--output", str(trace)]
    assert main(args) == EXIT_OK
    capsys.readouterr()

    assert main(["verify", "--trace", str(trace)]) == EXIT_OK
    assert capsys.readouterr().out.startswith("satisfied")

    assert main(["pattern", "--gadget", "cap", "--trace", str(trace)]) == EXIT_OK
    assert capsys.readouterr().out.strip().endswith("0 violation(s)")


def test_sgreedy_writes_both_traces_to_output(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    seq = _sequence_file(tmp_path, 3, 4, 1, 2)
    out = tmp_path / "sides.jsonl"
    assert main(["run", "--input", seq, "--alg", "sgreedy", "--emit-trace", "--json", "--output", str(out)]) == EXIT_OK
    assert capsys.readouterr().out.startswith("cost ")
    traces = [trace_from_json(line) for line in out.read_text().splitlines()]
    assert [t.algorithm for t in traces] == ["greedy-left", "greedy-right"]

    text = tmp_path / "sides.trace"
    assert main(["run", "--input", seq, "--alg", "sgreedy", "--emit-trace", "--output", str(text)]) == EXIT_OK
    headers = [ln for ln in text.read_text().splitlines() if ln.startswith("# trace")]
    assert [h.split()[2] for h in headers] == ["alg=greedy-left", "alg=greedy-right"]


def test_verify_reports_the_first_bad_rectangle(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    grid = tmp_path / "diag.grid"
    write_grid(PointGrid([(1, 1), (2, 2)]), grid)
    assert main(["verify", "--grid", str(grid)]) == EXIT_FAILED
    assert capsys.readouterr().out.strip() == "unsatisfied: (1,1) (2,2)"


def test_decompose(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    seq = _sequence_file(tmp_path, 2, 4, 1, 3)
    assert main(["decompose", "--input", seq]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "(2,4,1,3 | 1 1 1 1)"
    assert main(["decompose", "--input", seq, "--k", "2"]) == EXIT_FAILED
    assert capsys.readouterr().out.strip() == "not 2-decomposable"


def test_pattern_queries(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    seq = _sequence_file(tmp_path, 3, 4, 1, 2)
    assert main(["pattern", "--input", seq, "--pattern", "3,2,1"]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "avoids"
    assert main(["pattern", "--input", seq, "--pattern", "2,1"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("contains ")

    assert main(["pattern", "--input", _sequence_file(tmp_path, 1, 2, 3), "--avoidance", "3"]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "2"
    assert main(["pattern", "--input", seq]) == EXIT_USAGE


def test_opt(tmp_path: Path, capsys: pytest.CaptureFixture[str], monkeypatch: pytest.MonkeyPatch) -> None:
    assert main(["opt", "--input", _sequence_file(tmp_path, 2, 1)]) == EXIT_OK
    assert capsys.readouterr().out.startswith("opt 3 ")

    seq = _sequence_file(tmp_path, 2, 4, 1, 3)
    assert main(["opt", "--input", seq, "--lower-bound"]) == EXIT_OK
    assert "holds True" in capsys.readouterr().out

    # the CLI exports limit flags, so pin the variable for monkeypatch to restore
    monkeypatch.setenv("BST_LAB_NODE_CAP", "10000000")
    assert main(["opt", "--input", _sequence_file(tmp_path, 5, 4, 3, 2, 1), "--node-cap", "1"]) == EXIT_LIMIT
    assert capsys.readouterr().out.startswith("opt <= ")


def test_experiment_outputs(tmp_path: Path) -> None:
    csv_path = tmp_path / "runs" / "sequential.csv"
    prom = tmp_path / "runs" / "bst_lab.prom"
    args = ["experiment", "--suite", "sequential", "--n", "1", "8", "--output", str(csv_path)]
    assert main(args + ["--metrics-out", str(prom)]) == EXIT_OK
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "suite,alg,class,n,k,seed,cost,rhs,pass,ms"
    assert len(lines) == 3
    assert "bst_lab_records_total" in prom.read_text()

    jsonl = tmp_path / "runs" / "sequential.jsonl"
    assert main(["experiment", "--suite", "sequential", "--n", "4", "--json", "--output", str(jsonl)]) == EXIT_OK
    assert '"pass":true' in jsonl.read_text()


def test_regress(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["regress", "--verify", str(ASSETS / "regressions.json")]) == EXIT_OK
    assert "gadget-counter: ok" in capsys.readouterr().out

    store = tmp_path / "regressions.json"
    assert main(["regress", "--target", "pattern-counter", "--max-n", "4", "--store", str(store)]) == EXIT_OK
    assert '"target":"pattern-counter"' in capsys.readouterr().out
    assert store.exists()

    assert main(["regress", "--target", "gadget-counter", "--max-n", "3", "--store", str(store)]) == EXIT_FAILED
    assert main(["regress"]) == EXIT_USAGE
