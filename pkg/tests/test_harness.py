import json
import subprocess
import sys
from collections import Counter
from pathlib import Path

import pytest

from shpar.harness import (
    CASES,
    MB,
    compile_case,
    generate_input,
    materialize_inputs,
    run_case,
)

EXPECTED_STRUCTURES = {
    "nfa-regex": {"stateless": 3},
    "sort": {"stateless": 1, "pure": 1},
    "top-n": {"stateless": 2, "pure": 4},
    "wf": {"stateless": 3, "pure": 3},
    "spell": {"stateless": 4, "pure": 3},
    "difference": {"stateless": 2, "pure": 2, "n-pure": 1},
    "bi-grams": {"stateless": 3, "pure": 3},
    "set-difference": {"stateless": 5, "pure": 2, "n-pure": 1},
    "sort-sort": {"stateless": 1, "pure": 2},
    "shortest-scripts": {"stateless": 5, "pure": 2},
}


def test_corpus_covers_the_ten_cases():
    assert set(CASES) == set(EXPECTED_STRUCTURES)


@pytest.mark.parametrize("name", sorted(CASES))
def test_case_structure_matches_registry(name, tmp_path):
    case = CASES[name]
    values = materialize_inputs(case, 4096, 7, tmp_path / "cache",
                                tmp_path)
    compiled = compile_case(case, 4, values)
    assert dict(compiled.class_structure()) == EXPECTED_STRUCTURES[name]
    assert case.structure == EXPECTED_STRUCTURES[name]
    assert not compiled.demotions


def test_input_generation_is_deterministic(tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    generate_input("words", a, 65536, 42)
    generate_input("words", b, 65536, 42)
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.txt"
    generate_input("words", c, 65536, 43)
    assert a.read_bytes() != c.read_bytes()


def test_dict_input_is_sorted(tmp_path):
    path = tmp_path / "dict.txt"
    generate_input("dict", path, 0, 9)
    lines = path.read_bytes().splitlines()
    assert lines == sorted(lines)
    assert len(set(lines)) == len(lines)


@pytest.mark.parametrize("name", ["sort", "wf"])
def test_run_case_records_digests_and_times(name, tmp_path):
    result = run_case(CASES[name], 2, 64 * 1024, tmp_path, seed=5)
    assert result.equivalent, result.failure_dir
    assert result.sequential_digest == result.parallel_digest
    assert result.sequential_seconds > 0
    assert result.parallel_seconds > 0
    assert sum(result.node_counts.values()) > 0


def test_run_case_keeps_failure_artifacts(tmp_path, monkeypatch):
    import shpar.harness as harness

    real = harness.compile_case

    def sabotage(case, width, values, options=None):
        compiled = real(case, width, values, options)
        compiled.script = "echo sabotaged"
        return compiled

    monkeypatch.setattr(harness, "compile_case", sabotage)
    result = harness.run_case(CASES["sort"], 2, 4096, tmp_path, seed=5)
    assert not result.equivalent
    assert result.failure_dir is not None
    kept = Path(result.failure_dir)
    assert (kept / "sequential.out").exists()
    assert (kept / "parallel.out").read_bytes() == b"sabotaged\n"


def test_sort_case_widths_match_width8_breakdown(tmp_path):
    case = CASES["sort"]
    values = materialize_inputs(case, 4096, 3, tmp_path / "cache", tmp_path)
    compiled = compile_case(case, 8, values)
    census = compiled.census()
    assert census["command:tr"] == 8
    assert census["map:sort"] == 8
    assert census["aggregate"] == 7
    assert census["eager"] == 14


def test_harness_cli_report(tmp_path):
    report = tmp_path / "report.json"
    proc = subprocess.run(
        [sys.executable, "-m", "shpar.harness", "run", "--case", "sort",
         "--widths", "1,2", "--size", "0.05", "--seed", "3",
         "--workdir", str(tmp_path / "work"), "--report", str(report)],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE, timeout=300,
    )
    assert proc.returncode == 0, proc.stderr
    rows = json.loads(report.read_text())
    assert len(rows) == 2
    assert all(r["sequential_digest"] == r["parallel_digest"] for r in rows)
    assert b"speedup" in proc.stdout
