"""Stream splitting: uniform in-order line chunks, plus byte-range reads of
regular files for compile-time input partitioning."""

from __future__ import annotations

import io
import os
import sys
import tempfile
from dataclasses import dataclass

from .ioutil import fail, maybe_help, split_lines, unix_signals

USAGE = """\
usage: shpar-split N OUT1..OUTN         split stdin into N uniform line chunks
       shpar-split --ranges FILE N I    print the I-th of N line-aligned
                                        byte-range chunks of FILE (0-based)

Chunks are contiguous and in input order; concatenating them reproduces the
input exactly."""

_BLOCK = 1 << 20


@dataclass
class ChunkPlan:
    total_lines: int
    fanout: int
    counts: list[int]


def chunk_plan(total_lines: int, fanout: int) -> ChunkPlan:
    """Uniform in-order distribution: the first total%n chunks get one extra."""
    base, extra = divmod(total_lines, fanout)
    counts = [base + 1 if i < extra else base for i in range(fanout)]
    return ChunkPlan(total_lines, fanout, counts)


def chunk_lines(data: bytes, fanout: int) -> list[bytes]:
    """Pure equivalent of the split command: n contiguous line chunks."""
    lines = split_lines(data)
    plan = chunk_plan(len(lines), fanout)
    out = []
    at = 0
    for count in plan.counts:
        out.append(b"".join(lines[at:at + count]))
        at += count
    return out


def range_bounds(size: int, data_at, fanout: int) -> list[int]:
    """Chunk boundaries for a byte range: boundary i sits just after the first
    newline at or past i*size/n.  data_at(pos, length) reads bytes."""
    bounds = [0]
    for i in range(1, fanout):
        target = size * i // fanout
        pos = max(target, bounds[-1])
        boundary = size
        while pos < size:
            block = data_at(pos, _BLOCK)
            if not block:
                break
            nl = block.find(b"\n")
            if nl >= 0:
                boundary = pos + nl + 1
                break
            pos += len(block)
        bounds.append(min(max(boundary, bounds[-1]), size))
    bounds.append(size)
    return bounds


def range_chunk(data: bytes, fanout: int, index: int) -> bytes:
    """Pure equivalent of `--ranges` over in-memory bytes."""
    if not 0 <= index < fanout:
        raise ValueError("chunk index out of range")
    bounds = range_bounds(len(data), lambda p, n: data[p:p + n], fanout)
    return data[bounds[index]:bounds[index + 1]]


def emit_file_range(path: str, fanout: int, index: int, out) -> None:
    with open(path, "rb") as handle:
        handle.seek(0, os.SEEK_END)
        size = handle.tell()

        def data_at(pos: int, length: int) -> bytes:
            handle.seek(pos)
            return handle.read(length)

        bounds = range_bounds(size, data_at, fanout)
        start, stop = bounds[index], bounds[index + 1]
        handle.seek(start)
        remaining = stop - start
        while remaining:
            block = handle.read(min(_BLOCK, remaining))
            if not block:
                fail("shpar-split", f"{path}: file shrank while reading")
            out.write(block)
            remaining -= len(block)
    out.flush()


def split_stream(stream, out_paths: list[str]) -> None:
    """Materialize the input, then write uniform in-order line chunks."""
    created: list[str] = []
    spool = tempfile.TemporaryFile(prefix="shpar-split-")
    try:
        total_lines = 0
        trailing_unterminated = False
        while True:
            block = stream.read(_BLOCK)
            if not block:
                break
            spool.write(block)
            total_lines += block.count(b"\n")
            trailing_unterminated = not block.endswith(b"\n")
        if trailing_unterminated:
            total_lines += 1
        plan = chunk_plan(total_lines, len(out_paths))
        spool.seek(0)
        buffered = io.BufferedReader(io.FileIO(spool.fileno(), closefd=False))
        for path, count in zip(out_paths, plan.counts):
            with open(path, "wb") as out:
                created.append(path)
                for _ in range(count):
                    line = buffered.readline()
                    if not line:
                        break
                    out.write(line)
    except OSError as exc:
        for path in created:
            try:
                os.unlink(path)
            except OSError:
                pass
        fail("shpar-split", str(exc))
    finally:
        spool.close()


def main(argv: list[str] | None = None) -> int:
    unix_signals()
    argv = sys.argv[1:] if argv is None else argv
    maybe_help("shpar-split", argv, USAGE)
    if argv and argv[0] == "--ranges":
        if len(argv) != 4:
            fail("shpar-split", "--ranges needs FILE N I")
        path, fanout, index = argv[1], argv[2], argv[3]
        try:
            fanout, index = int(fanout), int(index)
        except ValueError:
            fail("shpar-split", "N and I must be integers")
        if fanout < 1 or not 0 <= index < fanout:
            fail("shpar-split", "need N >= 1 and 0 <= I < N")
        if not os.path.isfile(path):
            fail("shpar-split", f"{path}: not a regular file")
        emit_file_range(path, fanout, index, sys.stdout.buffer)
        return 0
    if len(argv) < 2:
        fail("shpar-split", "usage: shpar-split N OUT1..OUTN")
    try:
        fanout = int(argv[0])
    except ValueError:
        fail("shpar-split", f"bad fanout {argv[0]!r}")
    paths = argv[1:]
    if fanout < 1 or len(paths) != fanout:
        fail("shpar-split", f"expected {fanout} output paths, got {len(paths)}")
    split_stream(sys.stdin.buffer, paths)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
