import os
import subprocess
from pathlib import Path

import pytest

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def bash(script: str, cwd: Path, stdin: bytes = b"", tmpdir: Path | None = None,
         timeout: float = 60.0) -> subprocess.CompletedProcess:
    """Run script text under bash with C collation and a scoped TMPDIR."""
    env = dict(os.environ, LC_ALL="C")
    if tmpdir is not None:
        tmpdir.mkdir(parents=True, exist_ok=True)
        env["TMPDIR"] = str(tmpdir)
    return subprocess.run(
        ["bash", "-c", script],
        input=stdin,
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        cwd=str(cwd),
        env=env,
        timeout=timeout,
    )


def processes_referencing(fragment: str) -> list[str]:
    """Command lines of other processes that mention `fragment`."""
    me = os.getpid()
    hits = []
    for entry in os.listdir("/proc"):
        if not entry.isdigit() or int(entry) == me:
            continue
        try:
            cmdline = Path(f"/proc/{entry}/cmdline").read_bytes()
        except OSError:
            continue
        text = cmdline.replace(b"\x00", b" ").decode(errors="replace")
        if fragment in text and "conftest" not in text:
            hits.append(f"{entry}: {text.strip()}")
    return hits


@pytest.fixture
def shell(tmp_path):
    def run(script: str, stdin: bytes = b"", timeout: float = 60.0):
        return bash(script, cwd=tmp_path, stdin=stdin,
                    tmpdir=tmp_path / "shell-tmp", timeout=timeout)

    return run
