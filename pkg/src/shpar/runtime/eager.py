"""Eager relay: byte-identical passthrough that consumes its input at
producer speed, buffering in memory and spilling to disk past a cap, so an
unready consumer never blocks the upstream pipeline."""

from __future__ import annotations

import os
import sys
import tempfile
import threading
from collections import deque

from .ioutil import fail, maybe_help, unix_signals

USAGE = """\
usage: shpar-eager [--buffer BYTES] [OUTPUT]

Copies stdin to OUTPUT (default stdout).  Input is consumed as fast as the
producer writes it, regardless of consumer readiness; up to BYTES (default
64 MiB) is buffered in memory, the rest spills to a temporary file.

OUTPUT is opened lazily by the relay itself: when it is a FIFO whose reader
shows up late, upstream progress is never blocked on that open."""

DEFAULT_CAP = 64 * 1024 * 1024
_BLOCK = 1 << 20


class EagerBuffer:
    """Single-producer/single-consumer FIFO byte buffer with disk spill."""

    def __init__(self, cap: int):
        self.cap = cap
        self.cond = threading.Condition()
        self.queue: deque = deque()  # bytes | (spill_offset, length)
        self.mem_bytes = 0
        self.done = False
        self.error: BaseException | None = None
        self.spill = None
        self.spill_at = 0

    def push(self, block: bytes):
        with self.cond:
            spill_to = -1
            if self.mem_bytes + len(block) > self.cap:
                if self.spill is None:
                    self.spill = tempfile.TemporaryFile(prefix="shpar-eager-")
                spill_to = self.spill_at
                self.spill_at += len(block)
        if spill_to >= 0:
            # pwrite/pread keep fill and drain free of shared seek state
            os.pwrite(self.spill.fileno(), block, spill_to)
            with self.cond:
                self.queue.append((spill_to, len(block)))
                self.cond.notify()
        else:
            with self.cond:
                self.queue.append(block)
                self.mem_bytes += len(block)
                self.cond.notify()

    def finish(self, error: BaseException | None = None):
        with self.cond:
            self.done = True
            self.error = error
            self.cond.notify()

    def pop(self) -> bytes | None:
        with self.cond:
            while not self.queue and not self.done:
                self.cond.wait()
            if not self.queue:
                if self.error is not None:
                    raise self.error
                return None
            item = self.queue.popleft()
        if isinstance(item, bytes):
            with self.cond:
                self.mem_bytes -= len(item)
            return item
        offset, length = item
        return os.pread(self.spill.fileno(), length, offset)


def _open_output(path: str) -> int:
    # O_TRUNC is a no-op on FIFOs and gives fresh contents on regular files
    return os.open(path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o666)


def relay(in_fd: int, output: str | None, cap: int) -> None:
    buffer = EagerBuffer(cap)

    def fill():
        try:
            while True:
                block = os.read(in_fd, _BLOCK)
                if not block:
                    buffer.finish()
                    return
                buffer.push(block)
        except BaseException as exc:  # surface spill/read failures to drain side
            buffer.finish(exc)

    filler = threading.Thread(target=fill, daemon=True)
    filler.start()
    out_fd: int | None = None
    try:
        while True:
            block = buffer.pop()
            if block is None:
                break
            if out_fd is None:
                # deferred: opening a FIFO blocks until its reader arrives,
                # and input consumption must not wait for that
                out_fd = 1 if output is None else _open_output(output)
            view = memoryview(block)
            while view:
                written = os.write(out_fd, view)
                view = view[written:]
        if out_fd is None:
            out_fd = 1 if output is None else _open_output(output)
    finally:
        if out_fd is not None and out_fd != 1:
            os.close(out_fd)
    filler.join()


def main(argv: list[str] | None = None) -> int:
    unix_signals()
    argv = sys.argv[1:] if argv is None else argv
    maybe_help("shpar-eager", argv, USAGE)
    cap = DEFAULT_CAP
    output: str | None = None
    i = 0
    while i < len(argv):
        if argv[i] == "--buffer" and i + 1 < len(argv):
            cap, i = int(argv[i + 1]), i + 2
        elif argv[i].startswith("--buffer="):
            cap = int(argv[i].split("=", 1)[1])
            i += 1
        elif not argv[i].startswith("-") and output is None:
            output = argv[i]
            i += 1
        else:
            fail("shpar-eager", f"unexpected argument {argv[i]!r}")
    if cap < 1:
        fail("shpar-eager", "--buffer must be positive")
    try:
        relay(0, output, cap)
    except OSError as exc:
        fail("shpar-eager", str(exc))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
