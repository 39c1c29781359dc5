import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from shpar import __version__


def shpar(args, cwd: Path, stdin: bytes = b"", timeout: float = 60.0):
    env = dict(os.environ, LC_ALL="C", TMPDIR=str(cwd / "tmp"))
    (cwd / "tmp").mkdir(exist_ok=True)
    return subprocess.run(
        [sys.executable, "-m", "shpar.cli", *args],
        input=stdin, stdout=subprocess.PIPE, stderr=subprocess.PIPE,
        cwd=str(cwd), env=env, timeout=timeout,
    )


def test_run_hello_world(tmp_path):
    script = tmp_path / "hello-world.sh"
    script.write_text("echo hello world\n")
    proc = shpar(["hello-world.sh"], cwd=tmp_path)
    assert proc.returncode == 0
    assert proc.stdout == b"hello world\n"


def test_command_string_mode(tmp_path):
    proc = shpar(["-c", "echo from -c"], cwd=tmp_path)
    assert proc.returncode == 0
    assert proc.stdout == b"from -c\n"


def test_requires_exactly_one_input(tmp_path):
    assert shpar([], cwd=tmp_path).returncode == 2
    script = tmp_path / "s.sh"
    script.write_text("true\n")
    assert shpar(["s.sh", "-c", "true"], cwd=tmp_path).returncode == 2


def test_version():
    proc = subprocess.run([sys.executable, "-m", "shpar.cli", "-v"],
                          stdout=subprocess.PIPE)
    assert proc.returncode == 0
    assert __version__.encode() in proc.stdout


@pytest.mark.parametrize("status", [0, 1, 2])
def test_exit_status_transparency(tmp_path, status):
    script = tmp_path / "s.sh"
    script.write_text(f"echo running; exit {status}\n")
    proc = shpar(["s.sh"], cwd=tmp_path)
    assert proc.returncode == status


def test_width1_output_identical(tmp_path):
    (tmp_path / "inp.txt").write_bytes(b"B\nc\nA\n")
    script = tmp_path / "s.sh"
    script.write_text("cat inp.txt | tr A-Z a-z | sort\n")
    seq = subprocess.run(["bash", str(script)], stdout=subprocess.PIPE,
                         cwd=tmp_path, env=dict(os.environ, LC_ALL="C"))
    par = shpar(["-w", "1", "s.sh"], cwd=tmp_path)
    assert par.stdout == seq.stdout


def test_dry_run_prints_and_does_not_execute(tmp_path):
    (tmp_path / "inp.txt").write_bytes(b"x\n")
    script = tmp_path / "s.sh"
    script.write_text("cat inp.txt | tr x y | sort > result.txt\n")
    proc = shpar(["--dry_run_compiler", "-p", "-w", "2", "s.sh"], cwd=tmp_path)
    assert proc.returncode == 0
    assert b"mkfifo" in proc.stdout
    assert b"kill -PIPE" in proc.stdout
    assert not (tmp_path / "result.txt").exists()


def test_no_optimize_behaves_sequentially(tmp_path):
    (tmp_path / "inp.txt").write_bytes(b"b\na\nc\n")
    script = tmp_path / "s.sh"
    script.write_text("cat inp.txt | sort\n")
    plain = shpar(["--no_optimize", "-p", "-w", "4", "s.sh"], cwd=tmp_path)
    assert plain.returncode == 0
    assert b"mkfifo" not in plain.stdout
    assert plain.stdout.endswith(b"a\nb\nc\n")


def test_assert_compiler_success(tmp_path):
    (tmp_path / "inp.txt").write_bytes(b"a\nb\n")
    good = tmp_path / "good.sh"
    good.write_text("cat inp.txt | sort\n")
    bad = tmp_path / "bad.sh"
    bad.write_text("cat inp.txt | awk '{print}' | sort\n")
    assert shpar(["--assert_compiler_success", "-w", "2", "good.sh"],
                 cwd=tmp_path).returncode == 0
    proc = shpar(["--assert_compiler_success", "-w", "2", "bad.sh"],
                 cwd=tmp_path)
    assert proc.returncode == 3
    assert b"awk" in proc.stderr


def test_conservatism_with_unannotated_command(tmp_path):
    (tmp_path / "inp.txt").write_bytes(b"3 c\n1 a\n2 b\n" * 50)
    script = tmp_path / "s.sh"
    script.write_text("cat inp.txt | awk '{print $2}' | sort\n")
    seq = subprocess.run(["bash", str(script)], stdout=subprocess.PIPE,
                         cwd=tmp_path, env=dict(os.environ, LC_ALL="C"))
    par = shpar(["-w", "4", "s.sh"], cwd=tmp_path)
    assert par.returncode == 0
    assert par.stdout == seq.stdout


def test_output_time(tmp_path):
    script = tmp_path / "s.sh"
    script.write_text("echo timed\n")
    proc = shpar(["-t", "s.sh"], cwd=tmp_path)
    assert proc.returncode == 0
    assert b"time parse" in proc.stderr
    assert b"time execute" in proc.stderr


def test_debug_levels_and_log_file(tmp_path):
    (tmp_path / "inp.txt").write_bytes(b"x\n")
    script = tmp_path / "s.sh"
    script.write_text("cat inp.txt | tr x y | sort\n")
    log = tmp_path / "compile.log"
    proc = shpar(["-d", "2", "--log_file", str(log), "--dry_run_compiler",
                  "-w", "2", "s.sh"], cwd=tmp_path)
    assert proc.returncode == 0
    logged = log.read_text()
    assert "region" in logged
    assert '"nodes"' in logged  # DFG dump at level >= 2


def test_preprocess_only(tmp_path):
    script = tmp_path / "s.sh"
    script.write_text("cat a | sort > b\n")
    proc = shpar(["--preprocess_only", "--output_preprocessed", "s.sh"],
                 cwd=tmp_path)
    assert proc.returncode == 0
    assert b"cat a | sort" in proc.stdout
    assert not (tmp_path / "b").exists()


def test_config_path_sets_width(tmp_path):
    (tmp_path / "inp.txt").write_bytes(b"x\n")
    config = tmp_path / "conf.json"
    config.write_text(json.dumps({"default_width": 3}))
    script = tmp_path / "s.sh"
    script.write_text("cat inp.txt | tr x y | sort\n")
    proc = shpar(["--config_path", str(config), "--dry_run_compiler", "-d", "1",
                  "s.sh"], cwd=tmp_path)
    assert proc.returncode == 0
    assert b"width 3" in proc.stderr


def test_config_annotations_dir(tmp_path):
    extra = tmp_path / "annotations"
    extra.mkdir()
    (extra / "mystery.json").write_text(json.dumps({
        "command": "mystery",
        "cases": [{"predicate": "default", "class": "stateless",
                   "inputs": ["stdin"], "outputs": ["stdout"]}],
    }))
    config = tmp_path / "conf.json"
    config.write_text(json.dumps({"annotations_dir": str(extra)}))
    (tmp_path / "inp.txt").write_bytes(b"x\n")
    script = tmp_path / "s.sh"
    script.write_text("cat inp.txt | mystery | sort\n")
    with_conf = shpar(["--config_path", str(config), "--dry_run_compiler",
                       "--assert_compiler_success", "-w", "2", "s.sh"],
                      cwd=tmp_path)
    assert with_conf.returncode == 0
    without = shpar(["--dry_run_compiler", "--assert_compiler_success",
                     "-w", "2", "s.sh"], cwd=tmp_path)
    assert without.returncode == 3


def test_no_eager_flag(tmp_path):
    (tmp_path / "inp.txt").write_bytes(b"c\nb\na\n")
    script = tmp_path / "s.sh"
    script.write_text("cat inp.txt | tr a-z A-Z | sort\n")
    with_eager = shpar(["-p", "--dry_run_compiler", "-w", "2", "s.sh"],
                       cwd=tmp_path)
    without = shpar(["-p", "--dry_run_compiler", "--no_eager", "-w", "2",
                     "s.sh"], cwd=tmp_path)
    assert b"eager" in with_eager.stdout
    assert b"eager" not in without.stdout


def test_parse_error_reported(tmp_path):
    script = tmp_path / "s.sh"
    script.write_text("echo 'unterminated\n")
    proc = shpar(["s.sh"], cwd=tmp_path)
    assert proc.returncode == 2
    assert b"line 1" in proc.stderr
