"""Reference interpreter: sequential, deterministic DFG evaluation.

Command and map nodes run as real subprocesses over materialized inputs;
built-in nodes (cat, split, relay, aggregate, file partitions) use the same
pure cores as the runtime binaries.  This is the equivalence oracle for the
graph transformations, so it is deliberately single-threaded.
"""

from __future__ import annotations

import os
import subprocess
import tempfile
from pathlib import Path

from . import dfg as d
from .runtime.aggregate import agg_merge, agg_tac, agg_uniq, agg_uniq_c, agg_wc
from .runtime.split import chunk_lines, range_chunk

# commands for which exit status 1 is an outcome, not a failure
_STATUS_ONE_OK = {"grep", "egrep", "fgrep", "diff", "cmp"}


class InterpretationError(Exception):
    def __init__(self, node_id: int, status: int, detail: str = ""):
        super().__init__(f"node n{node_id} exited with status {status}{detail}")
        self.node_id = node_id
        self.status = status


def interpret(
    graph: d.Dfg,
    edge_inputs: dict[int, bytes] | None = None,
    file_inputs: dict[str, bytes] | None = None,
    cwd: str | Path | None = None,
) -> dict[int, bytes]:
    """Evaluate the graph, returning the bytes carried by every edge.

    Graph inputs are bound from `edge_inputs` (by edge id), `file_inputs`
    (by path), or, failing those, by reading the named file relative to cwd.
    """
    issues = graph.validate()
    if issues:
        raise ValueError(f"invalid graph: {issues}")
    edge_inputs = edge_inputs or {}
    file_inputs = file_inputs or {}
    cwd = Path(cwd) if cwd is not None else Path.cwd()
    content: dict[int, bytes] = {}
    # inputs read straight from disk keep their original argv spelling, so
    # path-printing commands (grep with several files) stay byte-faithful
    on_disk: set[int] = set()

    def file_bytes(path: str) -> bytes:
        if path in file_inputs:
            return file_inputs[path]
        return (cwd / path).read_bytes()

    for edge in graph.edges.values():
        if edge.producer is not None:
            continue
        if edge.edge_id in edge_inputs:
            content[edge.edge_id] = edge_inputs[edge.edge_id]
        elif edge.partition is not None:
            fanout, index = edge.partition
            content[edge.edge_id] = range_chunk(file_bytes(edge.path), fanout, index)
        elif edge.path is not None:
            content[edge.edge_id] = file_bytes(edge.path)
            if edge.path not in file_inputs:
                on_disk.add(edge.edge_id)
        else:
            content[edge.edge_id] = b""

    env = dict(os.environ, LC_ALL="C")
    with tempfile.TemporaryDirectory(prefix="shpar-interp-") as scratch:
        scratch = Path(scratch)
        serial = 0
        for nid in graph.topo_order():
            node = graph.nodes[nid]
            ins = [content[e] for e in node.streaming_inputs]
            if node.kind == d.CAT:
                # concatenation of line sequences: an unterminated trailing
                # line is an element of its own, never glued to the next
                # stream's first line
                parts = []
                for index, data in enumerate(ins):
                    if data and not data.endswith(b"\n") and index < len(ins) - 1:
                        data += b"\n"
                    parts.append(data)
                out = b"".join(parts)
            elif node.kind == d.RELAY:
                out = ins[0]
            elif node.kind == d.SPLIT:
                chunks = chunk_lines(ins[0], len(node.outputs))
                for eid, chunk in zip(node.outputs, chunks):
                    content[eid] = chunk
                continue
            elif node.kind == d.AGGREGATE:
                program, flags = node.agg
                if program == "agg-wc":
                    out = agg_wc(ins)
                elif program == "agg-merge":
                    out = agg_merge(flags, ins)
                elif program == "agg-uniq":
                    out = agg_uniq_c(ins) if "-c" in flags else agg_uniq(ins)
                elif program == "agg-tac":
                    out = agg_tac(ins)
                else:
                    raise InterpretationError(nid, -1, f": unknown aggregator {program}")
            elif node.kind in (d.COMMAND, d.MAP):
                serial += 1
                out = _run_command(node, ins, scratch, serial, cwd, env, on_disk)
            else:
                raise InterpretationError(nid, -1, f": unknown node kind {node.kind}")
            for eid in node.outputs:
                content[eid] = out
    return content


def _run_command(node, ins, scratch: Path, serial: int, cwd: Path, env,
                 on_disk: set[int]) -> bytes:
    inst = node.instance
    stdin_data = b""
    if node.input_slots is None:
        argv = [inst.name] + inst.argv_without_input_operands()
        if ins:
            stdin_data = ins[0]
    else:
        argv = [inst.name] + list(inst.argv)
        for index, (eid, slot) in enumerate(zip(node.streaming_inputs, node.input_slots)):
            data = ins[index]
            if slot.kind == "stdin":
                stdin_data = data
            elif eid in on_disk:
                pass  # original path, original spelling
            else:
                path = scratch / f"in-{serial}-{index}"
                path.write_bytes(data)
                # +1: instance argv excludes the command name
                argv[slot.arg_index + 1] = str(path)
    out_path: Path | None = None
    out_ref = inst.outputs[0] if inst.outputs else None
    if out_ref is not None and out_ref.kind == "file" and out_ref.arg_index is not None:
        out_path = scratch / f"out-{serial}"
        argv[out_ref.arg_index + 1] = str(out_path)
    proc = subprocess.run(
        argv,
        input=stdin_data,
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        cwd=str(cwd),
        env=env,
    )
    if proc.returncode != 0 and not (
        proc.returncode == 1 and inst.name in _STATUS_ONE_OK
    ):
        raise InterpretationError(
            node.node_id,
            proc.returncode,
            f" ({inst.name}): {proc.stderr.decode(errors='replace').strip()}",
        )
    if out_path is not None:
        return out_path.read_bytes() if out_path.exists() else b""
    return proc.stdout
