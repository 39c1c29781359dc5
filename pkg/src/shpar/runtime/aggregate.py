"""Aggregators combining the outputs of data-parallel map stages.

Each aggregator reads its inputs (file or FIFO paths) in order and writes a
single stream that matches what the sequential command would have produced
on the concatenated raw input.
"""

from __future__ import annotations

import re
import sys
from decimal import Decimal
from functools import reduce
from heapq import merge as heap_merge

from .ioutil import fail, maybe_help, read_path, split_lines, unix_signals, write_stdout

PAD_LEN = 7


# -- wc ----------------------------------------------------------------------

def agg_wc(parts: list[bytes]) -> bytes:
    """Column-wise sum of count rows, replicating wc's stdin output format
    (bare number for one column, 7-wide right-justified fields otherwise)."""
    if not parts:
        return b""
    if len(parts) == 1:
        return parts[0]

    def parse(part: bytes, index: int) -> list[int]:
        try:
            return [int(f) for f in part.split()]
        except ValueError:
            fail("shpar-agg-wc", f"input {index + 1}: non-numeric count field")

    def add(a: list[int], b: list[int]) -> list[int]:
        if not a:
            return b
        if len(a) != len(b):
            fail("shpar-agg-wc", "inputs disagree on column count")
        return [x + y for x, y in zip(a, b)]

    totals = reduce(add, (parse(p, i) for i, p in enumerate(parts)), [])
    if not totals:
        return b""
    if len(totals) == 1:
        return str(totals[0]).encode() + b"\n"
    return (" ".join(str(v).rjust(PAD_LEN) for v in totals)).encode() + b"\n"


# -- sort merge ---------------------------------------------------------------

_NUM_RE = re.compile(rb"^[ \t]*(-?(?:\d+\.?\d*|\.\d+))")
_KEY_RE = re.compile(r"^(\d+)(?:\.(\d+))?(?:,(\d+)(?:\.(\d+))?)?([bn]*)$")
_FIELD_RE = re.compile(rb"[ \t]*[^ \t]+|[ \t]+$")


class MergeFlags:
    def __init__(self, flags: list[str]):
        self.numeric = False
        self.reverse = False
        self.stable = False
        self.strip_blanks = False
        self.separator: bytes | None = None
        self.keys: list[tuple[int, int | None, str]] = []  # (start, stop, mods)
        i = 0
        while i < len(flags):
            arg = flags[i]
            if arg in ("-k", "-t") and i + 1 < len(flags):
                value, i = flags[i + 1], i + 2
                self._value_flag(arg, value)
                continue
            if arg.startswith("-k") and len(arg) > 2:
                self._value_flag("-k", arg[2:])
            elif arg.startswith("-t") and len(arg) > 2:
                self._value_flag("-t", arg[2:])
            elif arg.startswith("-") and arg != "-":
                for c in arg[1:]:
                    if c == "n":
                        self.numeric = True
                    elif c == "r":
                        self.reverse = True
                    elif c == "s":
                        self.stable = True
                    elif c == "b":
                        self.strip_blanks = True
                    else:
                        fail("shpar-agg-merge", f"unsupported sort flag -{c}")
            else:
                fail("shpar-agg-merge", f"unexpected argument {arg!r}")
            i += 1

    def _value_flag(self, name: str, value: str):
        if name == "-t":
            if len(value) != 1:
                fail("shpar-agg-merge", f"bad separator {value!r}")
            self.separator = value.encode()
        else:
            m = _KEY_RE.match(value)
            if not m or m.group(2) or m.group(4):
                fail("shpar-agg-merge", f"unsupported key spec {value!r}")
            start = int(m.group(1))
            stop = int(m.group(3)) if m.group(3) else None
            self.keys.append((start, stop, m.group(5)))

    def fields(self, line: bytes) -> list[bytes]:
        if self.separator is not None:
            return line.split(self.separator)
        return _FIELD_RE.findall(line)

    def key_for(self, line: bytes):
        line = line[:-1] if line.endswith(b"\n") else line
        parts = []
        if self.keys:
            fields = self.fields(line)
            for start, stop, mods in self.keys:
                stop = stop or len(fields)
                if self.separator is not None:
                    joiner = self.separator
                else:
                    joiner = b""
                text = joiner.join(fields[start - 1:stop])
                parts.append(self._component(text, mods))
        else:
            parts.append(self._component(line, ""))
        if not self.stable:
            parts.append(line)  # last-resort whole-line comparison
        return tuple(parts)

    def make_key(self):
        """Key function, specialized for the common flag shapes (the merge
        touches every line once per tree level, so this is the hot path)."""
        if not self.keys and not self.numeric and not self.stable:
            # plain byte collation: the sort key IS the last-resort key
            return lambda line: line[:-1] if line.endswith(b"\n") else line
        if not self.keys and self.numeric and not self.stable:
            numeric = _numeric_value

            def key(line: bytes):
                content = line[:-1] if line.endswith(b"\n") else line
                return (numeric(content), content)

            return key
        return self.key_for

    def _component(self, text: bytes, mods: str):
        numeric = self.numeric or "n" in mods
        if self.strip_blanks or "b" in mods:
            text = text.lstrip(b" \t")
        if numeric:
            return _numeric_value(text)
        return text


def _numeric_value(text: bytes):
    """GNU-style leading numeric value; exact (int or Decimal, which compare
    correctly with each other)."""
    m = _NUM_RE.match(text)
    if not m:
        return 0
    digits = m.group(1)
    try:
        return int(digits)
    except ValueError:
        return Decimal(digits.decode())


def agg_merge(flags: list[str], parts: list[bytes]) -> bytes:
    """Merge phase of a merge-sort: combine individually sorted inputs into a
    globally sorted stream under the same comparison flags."""
    conf = MergeFlags(flags)

    def lines(part: bytes):
        for line in split_lines(part):
            yield line if line.endswith(b"\n") else line + b"\n"

    merged = heap_merge(
        *(lines(p) for p in parts), key=conf.make_key(), reverse=conf.reverse
    )
    return b"".join(merged)


# -- uniq ---------------------------------------------------------------------

_COUNT_RE = re.compile(rb"^([ \t]*)(\d+) (.*)$", re.S)


def agg_uniq(parts: list[bytes]) -> bytes:
    """Concatenate uniq'd chunks, collapsing equal lines at chunk seams."""
    out: list[bytes] = []
    prev: bytes | None = None
    for part in parts:
        for line in split_lines(part):
            content = line.rstrip(b"\n")
            if prev is not None and content == prev:
                continue
            out.append(line)
            prev = content
    return b"".join(out)


def agg_uniq_c(parts: list[bytes]) -> bytes:
    """Combine `uniq -c` chunks, adding counts when a line spans a seam."""
    entries: list[tuple[int, bytes, bytes]] = []  # (count, content, terminator)
    for index, part in enumerate(parts):
        for line in split_lines(part):
            body = line[:-1] if line.endswith(b"\n") else line
            terminator = b"\n" if line.endswith(b"\n") else b""
            m = _COUNT_RE.match(body)
            if not m:
                fail("shpar-agg-uniq", f"input {index + 1}: malformed count field")
            count, content = int(m.group(2)), m.group(3)
            if entries and entries[-1][1] == content:
                prev_count, _, _ = entries[-1]
                entries[-1] = (prev_count + count, content, terminator)
            else:
                entries.append((count, content, terminator))
    out = []
    for count, content, terminator in entries:
        out.append(str(count).encode().rjust(PAD_LEN) + b" " + content + terminator)
    return b"".join(out)


# -- tac ----------------------------------------------------------------------

def agg_tac(parts: list[bytes]) -> bytes:
    """Emit already-reversed chunks in reverse chunk order."""
    return b"".join(reversed(parts))


# -- CLI entry points ---------------------------------------------------------

def _read_all(paths: list[str], program: str) -> list[bytes]:
    if not paths:
        fail(program, "no input streams")
    return [read_path(p) for p in paths]


def main_wc(argv: list[str] | None = None) -> int:
    unix_signals()
    argv = sys.argv[1:] if argv is None else argv
    maybe_help("shpar-agg-wc", argv,
               "usage: shpar-agg-wc F1..FN   column-wise sum of wc outputs")
    write_stdout(agg_wc(_read_all(argv, "shpar-agg-wc")))
    return 0


def main_merge(argv: list[str] | None = None) -> int:
    unix_signals()
    argv = sys.argv[1:] if argv is None else argv
    maybe_help("shpar-agg-merge", argv,
               "usage: shpar-agg-merge [sort flags] F1..FN   merge sorted streams")
    flags: list[str] = []
    paths: list[str] = []
    i = 0
    while i < len(argv):
        arg = argv[i]
        if not paths and arg.startswith("-") and arg != "-":
            flags.append(arg)
            if arg in ("-k", "-t") and i + 1 < len(argv):
                flags.append(argv[i + 1])
                i += 1
        else:
            paths.append(arg)
        i += 1
    write_stdout(agg_merge(flags, _read_all(paths, "shpar-agg-merge")))
    return 0


def main_uniq(argv: list[str] | None = None) -> int:
    unix_signals()
    argv = sys.argv[1:] if argv is None else argv
    maybe_help("shpar-agg-uniq", argv,
               "usage: shpar-agg-uniq [-c] F1..FN   stitch uniq'd chunks")
    counted = False
    if argv and argv[0] == "-c":
        counted = True
        argv = argv[1:]
    parts = _read_all(argv, "shpar-agg-uniq")
    write_stdout(agg_uniq_c(parts) if counted else agg_uniq(parts))
    return 0


def main_tac(argv: list[str] | None = None) -> int:
    unix_signals()
    argv = sys.argv[1:] if argv is None else argv
    maybe_help("shpar-agg-tac", argv,
               "usage: shpar-agg-tac F1..FN   reversed chunks in reverse order")
    write_stdout(agg_tac(_read_all(argv, "shpar-agg-tac")))
    return 0
