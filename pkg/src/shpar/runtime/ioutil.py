"""Shared plumbing for the runtime binaries."""

from __future__ import annotations

import signal
import sys


def unix_signals():
    """Restore default PIPE handling so the cleanup epilogue can stop us even
    while blocked on a FIFO open."""
    signal.signal(signal.SIGPIPE, signal.SIG_DFL)


def fail(program: str, message: str, status: int = 1):
    print(f"{program}: {message}", file=sys.stderr)
    raise SystemExit(status)


def maybe_help(program: str, argv: list[str], usage: str) -> None:
    if any(a in ("-h", "--help") for a in argv):
        print(usage)
        raise SystemExit(0)


def read_path(path: str) -> bytes:
    if path == "-":
        return sys.stdin.buffer.read()
    with open(path, "rb") as handle:
        return handle.read()


def write_stdout(data: bytes) -> None:
    sys.stdout.buffer.write(data)
    sys.stdout.buffer.flush()


def split_lines(data: bytes) -> list[bytes]:
    """Newline-terminated elements; a trailing unterminated line is an element.

    Only \\n delimits elements (bytes.splitlines would also split on \\r,
    \\v and friends, which are ordinary bytes here).
    """
    if not data:
        return []
    pieces = data.split(b"\n")
    out = [piece + b"\n" for piece in pieces[:-1]]
    if pieces[-1]:
        out.append(pieces[-1])
    return out
