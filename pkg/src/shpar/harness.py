"""Corpus runner: proves output equivalence between sequential and compiled
parallel execution at desk scale, and records wall times plus the compiled
node census for each case."""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import random
import shutil
import string
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

from .compiler import CompileOptions, CompileResult, compile_script

MB = 1024 * 1024


@dataclass
class BenchmarkCase:
    name: str
    script: str  # template: {IN} {IN2} {DICT} {LIST} {TMP1} {TMP2}
    structure: dict[str, int]  # expected parallelizability-class multiset
    placeholders: tuple[str, ...] = ("IN",)
    widths: tuple[int, ...] = (1, 2, 4, 8)


CASES: dict[str, BenchmarkCase] = {}


def _case(case: BenchmarkCase) -> BenchmarkCase:
    CASES[case.name] = case
    return case


_case(BenchmarkCase(
    name="nfa-regex",
    script="grep -E '(.)(.).*\\2\\1' {IN} | tr a-j A-J | grep -E 'A.*E'\n",
    structure={"stateless": 3},
))
_case(BenchmarkCase(
    name="sort",
    script="cat {IN} | tr A-Z a-z | sort\n",
    structure={"stateless": 1, "pure": 1},
))
_case(BenchmarkCase(
    name="top-n",
    script="cat {IN} | tr -c 'A-Za-z' '\\n' | tr A-Z a-z | sort | uniq -c "
           "| sort -rn | head -n 100\n",
    structure={"stateless": 2, "pure": 4},
))
_case(BenchmarkCase(
    name="wf",
    script="cat {IN} | tr -c 'A-Za-z' '\\n' | tr A-Z a-z | grep -v '^$' "
           "| sort | uniq -c | sort -rn\n",
    structure={"stateless": 3, "pure": 3},
))
_case(BenchmarkCase(
    name="spell",
    script="cat {IN} | tr A-Z a-z | tr -d '.,!?:;\"' | tr ' ' '\\n' "
           "| grep -v '^$' | sort | uniq | comm -23 - {DICT}\n",
    structure={"stateless": 4, "pure": 3},
    placeholders=("IN", "DICT"),
))
_case(BenchmarkCase(
    name="difference",
    script="cat {IN} | tr A-Z a-z | sort > {TMP1}\n"
           "cat {IN2} | tr a-z A-Z | sort > {TMP2}\n"
           "diff {TMP1} {TMP2}\n",
    structure={"stateless": 2, "pure": 2, "n-pure": 1},
    placeholders=("IN", "IN2", "TMP1", "TMP2"),
))
_case(BenchmarkCase(
    name="bi-grams",
    script="cat {IN} | tr -c 'A-Za-z' '\\n' | tr A-Z a-z | sort | uniq -c "
           "| grep -v '^ *1 ' | sort -rn\n",
    structure={"stateless": 3, "pure": 3},
))
_case(BenchmarkCase(
    name="set-difference",
    script="cat {IN} | tr A-Z a-z | sed 's/ing/ING/g' | grep -v '^$' "
           "| sort > {TMP1}\n"
           "cat {IN2} | tr A-Z a-z | grep -v '^$' | sort > {TMP2}\n"
           "diff {TMP1} {TMP2}\n",
    structure={"stateless": 5, "pure": 2, "n-pure": 1},
    placeholders=("IN", "IN2", "TMP1", "TMP2"),
))
_case(BenchmarkCase(
    name="sort-sort",
    script="cat {IN} | tr A-Z a-z | sort | sort -rn\n",
    structure={"stateless": 1, "pure": 2},
))
_case(BenchmarkCase(
    name="shortest-scripts",
    script="cat {LIST} | grep '\\.sh$' | sed 's|^\\./||' | tr A-Z a-z "
           "| grep -v tmp | cut -d/ -f1 | sort | uniq -c\n",
    structure={"stateless": 5, "pure": 2},
    placeholders=("LIST",),
))


# -- input generators ----------------------------------------------------------

_VOCAB_SUFFIXES = ("ing", "ed", "er", "tion", "ness", "", "", "")


def _vocabulary(rng: random.Random, count: int) -> list[str]:
    words = []
    for _ in range(count):
        stem = "".join(rng.choice(string.ascii_lowercase)
                       for _ in range(rng.randint(3, 8)))
        words.append(stem + rng.choice(_VOCAB_SUFFIXES))
    return words


def _write_pooled(path: Path, size: int, pool: list[str], seed: int):
    rng = random.Random(seed ^ 0x5EED)
    with open(path, "w") as out:
        written = 0
        while written < size:
            chunk = "".join(rng.choices(pool, k=512))
            out.write(chunk)
            written += len(chunk)


def generate_input(kind: str, path: Path, size: int, seed: int):
    rng = random.Random(seed)
    if kind == "words":
        vocab = _vocabulary(rng, 400)
        pool = [" ".join(rng.choices(vocab, k=rng.randint(4, 11))) + "\n"
                for _ in range(4096)]
        _write_pooled(path, size, pool, seed)
    elif kind == "longlines":
        # long lines of short tokens keep the backtracking regex busy
        pool = []
        for _ in range(2048):
            tokens = ["".join(rng.choice("abcdefghij")
                              for _ in range(rng.randint(3, 9)))
                      for _ in range(rng.randint(30, 60))]
            pool.append(" ".join(tokens) + "\n")
        _write_pooled(path, size, pool, seed)
    elif kind == "dict":
        vocab = sorted({w for w in _vocabulary(rng, 3000)})
        path.write_text("".join(w + "\n" for w in vocab))
    elif kind == "paths":
        dirs = [f"./pkg{i}" for i in range(40)]
        pool = []
        for _ in range(4096):
            d = rng.choice(dirs)
            stem = "".join(rng.choice(string.ascii_lowercase)
                           for _ in range(rng.randint(3, 10)))
            ext = rng.choice((".sh", ".sh", ".txt", ".py"))
            pool.append(f"{d}/{stem}{ext}\n")
        _write_pooled(path, size, pool, seed)
    else:
        raise ValueError(f"unknown generator kind {kind!r}")


_GEN_KIND = {
    "nfa-regex": "longlines",
    "shortest-scripts": "paths",
}


def materialize_inputs(case: BenchmarkCase, size: int, seed: int,
                       cache: Path, rundir: Path) -> dict[str, str]:
    """Fill the case's placeholders; inputs are cached across runs."""
    cache.mkdir(parents=True, exist_ok=True)
    values: dict[str, str] = {}
    for index, name in enumerate(case.placeholders):
        if name.startswith("TMP"):
            values[name] = str(rundir / f"{name.lower()}.out")
            continue
        if name == "DICT":
            kind, this_size = "dict", 0
        elif name == "LIST":
            kind, this_size = "paths", size
        else:
            kind, this_size = _GEN_KIND.get(case.name, "words"), size
        target = cache / f"{case.name}-{name.lower()}-{this_size}-{seed}.txt"
        if not target.exists():
            generate_input(kind, target, this_size, seed + index)
        values[name] = str(target)
    return values


# -- execution -----------------------------------------------------------------

def _digest(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as handle:
        while True:
            block = handle.read(1 << 20)
            if not block:
                break
            h.update(block)
    return h.hexdigest()


def run_under_bash(script: str, rundir: Path, stdout_path: Path) -> tuple[int, float]:
    script_path = rundir / "script.sh"
    script_path.write_text(script)
    env = dict(os.environ, LC_ALL="C", TMPDIR=str(rundir / "tmp"))
    (rundir / "tmp").mkdir(exist_ok=True)
    started = time.perf_counter()
    with open(stdout_path, "wb") as out:
        proc = subprocess.run(
            ["bash", str(script_path)],
            stdout=out,
            stderr=subprocess.PIPE,
            cwd=str(rundir),
            env=env,
        )
    elapsed = time.perf_counter() - started
    if proc.stderr:
        (rundir / "stderr.txt").write_bytes(proc.stderr)
    return proc.returncode, elapsed


@dataclass
class CaseResult:
    case: str
    width: int
    size: int
    sequential_digest: str = ""
    parallel_digest: str = ""
    sequential_seconds: float = 0.0
    parallel_seconds: float = 0.0
    sequential_status: int = 0
    parallel_status: int = 0
    node_counts: dict[str, int] = field(default_factory=dict)
    structure: dict[str, int] = field(default_factory=dict)
    demotions: int = 0
    failure_dir: str | None = None

    @property
    def equivalent(self) -> bool:
        return (self.sequential_digest == self.parallel_digest
                and self.sequential_status == self.parallel_status)

    @property
    def speedup(self) -> float:
        if self.parallel_seconds <= 0:
            return 0.0
        return self.sequential_seconds / self.parallel_seconds


def compile_case(case: BenchmarkCase, width: int, values: dict[str, str],
                 options: CompileOptions | None = None) -> CompileResult:
    source = case.script.format(**values)
    options = options or CompileOptions()
    options.width = width
    return compile_script(source, options)


def run_case(case: BenchmarkCase, width: int, size: int, workdir: Path,
             seed: int = 1729, keep_failures: bool = True) -> CaseResult:
    cache = workdir / "inputs"
    result = CaseResult(case=case.name, width=width, size=size)
    with tempfile.TemporaryDirectory(dir=str(workdir), prefix="run-") as tmp:
        rundir = Path(tmp)
        seq_dir = rundir / "seq"
        par_dir = rundir / "par"
        seq_dir.mkdir()
        par_dir.mkdir()
        seq_values = materialize_inputs(case, size, seed, cache, seq_dir)
        source = case.script.format(**seq_values)
        status, seconds = run_under_bash(source, seq_dir, seq_dir / "stdout")
        result.sequential_status = status
        result.sequential_seconds = seconds
        result.sequential_digest = _digest(seq_dir / "stdout")

        par_values = materialize_inputs(case, size, seed, cache, par_dir)
        compiled = compile_case(case, width, par_values)
        result.node_counts = dict(compiled.census())
        result.structure = dict(compiled.class_structure())
        result.demotions = len(compiled.demotions)
        status, seconds = run_under_bash(compiled.script, par_dir,
                                         par_dir / "stdout")
        result.parallel_status = status
        result.parallel_seconds = seconds
        result.parallel_digest = _digest(par_dir / "stdout")

        if not result.equivalent and keep_failures:
            keep = workdir / "failures" / f"{case.name}-w{width}"
            if keep.exists():
                shutil.rmtree(keep)
            keep.parent.mkdir(parents=True, exist_ok=True)
            keep.mkdir()
            shutil.copy(seq_dir / "stdout", keep / "sequential.out")
            shutil.copy(par_dir / "stdout", keep / "parallel.out")
            (keep / "script.par.sh").write_text(compiled.script)
            result.failure_dir = str(keep)
    return result


# -- reporting and CLI ----------------------------------------------------------

def format_table(results: list[CaseResult]) -> str:
    header = (f"{'case':<18} {'width':>5} {'ok':>3} {'seq(s)':>8} "
              f"{'par(s)':>8} {'speedup':>8}  nodes")
    lines = [header, "-" * len(header)]
    for r in results:
        nodes = sum(r.node_counts.values())
        lines.append(
            f"{r.case:<18} {r.width:>5} {'yes' if r.equivalent else 'NO':>3} "
            f"{r.sequential_seconds:>8.2f} {r.parallel_seconds:>8.2f} "
            f"{r.speedup:>8.2f}  {nodes}"
        )
    return "\n".join(lines)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="shpar-harness",
        description="Run the benchmark corpus sequentially and through the "
                    "compiler, checking output equivalence.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    run = sub.add_parser("run", help="run corpus cases")
    run.add_argument("--case", action="append",
                     help="case name (default: all)", choices=sorted(CASES))
    run.add_argument("--widths", default="1,2,4,8",
                     help="comma-separated widths")
    run.add_argument("--size", type=float, default=10.0,
                     help="input size in MB (default 10)")
    run.add_argument("--seed", type=int, default=1729)
    run.add_argument("--report", help="write machine-readable JSON here")
    run.add_argument("--workdir", help="working directory (default: temp)")
    args = parser.parse_args(argv)

    names = args.case or sorted(CASES)
    widths = [int(w) for w in args.widths.split(",") if w]
    size = int(args.size * MB)
    workdir = Path(args.workdir) if args.workdir else \
        Path(tempfile.mkdtemp(prefix="shpar-harness-"))
    workdir.mkdir(parents=True, exist_ok=True)

    results: list[CaseResult] = []
    for name in names:
        for width in widths:
            result = run_case(CASES[name], width, size, workdir, args.seed)
            results.append(result)
            print(format_table([result]).splitlines()[-1], flush=True)

    print()
    print(format_table(results))
    failures = [r for r in results if not r.equivalent]
    if args.report:
        payload = [r.__dict__ for r in results]
        Path(args.report).write_text(json.dumps(payload, indent=2))
    if failures:
        print(f"\n{len(failures)} case(s) diverged; outputs kept under "
              f"{workdir}/failures", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
