import random
import subprocess

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shpar.runtime.split import chunk_lines, chunk_plan, range_chunk

LINE = st.binary(max_size=12).filter(lambda b: b"\n" not in b)


@st.composite
def line_data(draw):
    lines = draw(st.lists(LINE, max_size=30))
    data = b"\n".join(lines)
    if lines and draw(st.booleans()):
        data += b"\n"
    return data


# -- chunk plan -----------------------------------------------------------------

def test_chunk_plan_seven_into_three():
    assert chunk_plan(7, 3).counts == [3, 2, 2]


def test_chunk_plan_properties():
    rng = random.Random(5)
    for _ in range(500):
        total, fanout = rng.randint(0, 1000), rng.randint(1, 12)
        plan = chunk_plan(total, fanout)
        assert sum(plan.counts) == total
        assert max(plan.counts) - min(plan.counts) <= 1
        extra = total % fanout
        assert all(c == plan.counts[0] for c in plan.counts[:extra])


def _line_aligned(chunks):
    """Only the final non-empty chunk may lack its trailing newline."""
    tail = max((i for i, c in enumerate(chunks) if c), default=-1)
    return all(c.endswith(b"\n") for i, c in enumerate(chunks)
               if c and i != tail)


@settings(max_examples=200, deadline=None)
@given(line_data(), st.integers(min_value=1, max_value=9))
def test_chunk_lines_concatenation_identity(data, fanout):
    chunks = chunk_lines(data, fanout)
    assert len(chunks) == fanout
    assert b"".join(chunks) == data
    assert _line_aligned(chunks)


def test_chunk_lines_empty():
    assert chunk_lines(b"", 4) == [b"", b"", b"", b""]


# -- byte-range partitioning -------------------------------------------------------

@settings(max_examples=200, deadline=None)
@given(line_data(), st.integers(min_value=1, max_value=9))
def test_range_chunks_disjoint_and_covering(data, fanout):
    chunks = [range_chunk(data, fanout, i) for i in range(fanout)]
    assert b"".join(chunks) == data
    assert _line_aligned(chunks)


def test_range_chunk_whole_file_when_fanout_one():
    data = b"a\nb\nc"
    assert range_chunk(data, 1, 0) == data


def test_range_chunks_on_random_files():
    rng = random.Random(77)
    for _ in range(100):
        lines = [bytes(rng.choices(range(32, 127), k=rng.randint(0, 40)))
                 for _ in range(rng.randint(0, 50))]
        data = b"\n".join(lines) + (b"\n" if rng.random() < 0.7 and lines else b"")
        fanout = rng.randint(1, 8)
        chunks = [range_chunk(data, fanout, i) for i in range(fanout)]
        assert b"".join(chunks) == data


# -- the split executable -----------------------------------------------------------

def run_split(args, stdin=b""):
    return subprocess.run(["shpar-split", *args], input=stdin,
                          stdout=subprocess.PIPE, stderr=subprocess.PIPE)


def test_split_seven_lines_three_ways(tmp_path):
    outs = [str(tmp_path / f"c{i}") for i in range(3)]
    proc = run_split(["3", *outs], stdin=b"1\n2\n3\n4\n5\n6\n7\n")
    assert proc.returncode == 0
    counts = [(tmp_path / f"c{i}").read_bytes().count(b"\n") for i in range(3)]
    assert counts == [3, 2, 2]


def test_split_empty_input(tmp_path):
    outs = [str(tmp_path / f"c{i}") for i in range(4)]
    proc = run_split(["4", *outs])
    assert proc.returncode == 0
    assert all((tmp_path / f"c{i}").read_bytes() == b"" for i in range(4))


def test_split_concatenation_identity_binary_safe(tmp_path):
    rng = random.Random(3)
    data = bytes(rng.choices(range(0, 256), k=20000)).replace(b"\n", b"~") \
        + b"\ntail without newline"
    data = data.replace(b"\r", b"\n")
    outs = [str(tmp_path / f"c{i}") for i in range(5)]
    proc = run_split(["5", *outs], stdin=data)
    assert proc.returncode == 0
    joined = b"".join((tmp_path / f"c{i}").read_bytes() for i in range(5))
    assert joined == data


def test_split_unwritable_output_cleans_up(tmp_path):
    good = tmp_path / "ok"
    bad = tmp_path / "missing-dir" / "chunk"
    proc = run_split(["2", str(good), str(bad)], stdin=b"a\nb\n")
    assert proc.returncode != 0
    assert not good.exists()


def test_split_ranges_cli_matches_pure(tmp_path):
    data = b"".join(b"line %d\n" % i for i in range(57)) + b"unterminated"
    source = tmp_path / "input.txt"
    source.write_bytes(data)
    for fanout in (1, 2, 5):
        got = b""
        for index in range(fanout):
            proc = subprocess.run(
                ["shpar-split", "--ranges", str(source), str(fanout),
                 str(index)],
                stdout=subprocess.PIPE)
            assert proc.returncode == 0
            assert proc.stdout == range_chunk(data, fanout, index)
            got += proc.stdout
        assert got == data


def test_split_help():
    proc = run_split(["--help"])
    assert proc.returncode == 0
    assert b"usage" in proc.stdout


def test_split_bad_usage():
    assert run_split(["0"]).returncode != 0
    assert run_split(["2", "only-one"]).returncode != 0
    assert run_split(["--ranges", "/nonexistent", "2", "0"]).returncode != 0
