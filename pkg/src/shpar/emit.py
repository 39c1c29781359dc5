"""Backend: lower expanded graphs to executable shell fragments and stitch
them back into the surrounding script.

Each fragment is a parenthesized subshell that creates the FIFOs for its
internal edges, backgrounds one process per node, waits only on the output
producers, then signals PIPE to whatever is still running upstream before
removing the FIFO directory.  An abort trap guarantees cleanup on the way
out of any failure mode.
"""

from __future__ import annotations

import shlex
import shutil
import sys
from dataclasses import dataclass, field

from . import dfg as d
from .regions import DataflowRegion, RegionPart
from .shast import (
    AndOr,
    Assignment,
    Background,
    ForLoop,
    Node,
    Pipeline,
    Sequence,
    SimpleCommand,
    Subshell,
    Unparsed,
    unparse,
)


class EmitError(Exception):
    pass


@dataclass
class EmitOptions:
    termination: str = "clean_up_graph"  # or "drain_stream"
    runtime_mode: str = "auto"  # auto | path | module
    grace_ticks: int = 20  # x 0.1s before escalating PIPE to TERM


@dataclass
class EmitPlan:
    """Concrete artifacts of backend emission for one region."""

    temp_dir_var: str
    fifo_edges: list[int] = field(default_factory=list)
    spawns: list["Spawn"] = field(default_factory=list)
    output_pids: list[int] = field(default_factory=list)  # spawn indices
    status_pids: list[int] = field(default_factory=list)
    uses_stdin: bool = False

    @property
    def cleanup_pids(self) -> list[int]:
        return list(range(len(self.spawns)))


@dataclass
class Spawn:
    text: str  # full command with redirections, no trailing '&'
    produced_fifos: list[int] = field(default_factory=list)
    consumed_fifos: list[int] = field(default_factory=list)


def _runtime_argv(tool: str, mode: str) -> str:
    if mode == "path" or (mode == "auto" and shutil.which(f"shpar-{tool}")):
        return f"shpar-{tool}"
    return f"{shlex.quote(sys.executable)} -m shpar.runtime {tool}"


def build_plan(g: d.Dfg, options: EmitOptions,
               status_source: int | None = None) -> EmitPlan:
    """Assign FIFOs to internal edges and one process to every node."""
    issues = g.validate()
    if issues:
        raise EmitError(f"graph not emittable: {issues}")
    plan = EmitPlan(temp_dir_var="__sp_dir")

    fifo_ids: set[int] = set()
    for edge in g.edges.values():
        internal = edge.producer is not None and edge.consumer is not None
        if internal or edge.partition is not None:
            fifo_ids.add(edge.edge_id)
    plan.fifo_edges = sorted(fifo_ids)

    def ref(edge: d.DfgEdge) -> str:
        if edge.edge_id in fifo_ids:
            return f'"$__sp_dir/e{edge.edge_id}"'
        if edge.kind == d.STDIN:
            plan.uses_stdin = True
            return "<&9"
        if edge.path is not None:
            return shlex.quote(edge.path)
        raise EmitError(f"edge e{edge.edge_id}: nothing to reference")

    def stdin_redirect(edge: d.DfgEdge) -> str:
        r = ref(edge)
        return r if r.startswith("<&") else f"< {r}"

    def stdout_redirect(edge: d.DfgEdge) -> str:
        if edge.edge_id not in fifo_ids and edge.kind == d.STDOUT:
            return ""  # inherit the fragment's stdout
        op = ">>" if edge.append else ">"
        return f"{op} {ref(edge)}"

    # readers for compile-time file partitions
    split_tool = _runtime_argv("split", options.runtime_mode)
    for eid in plan.fifo_edges:
        edge = g.edges[eid]
        if edge.partition is None:
            continue
        fanout, index = edge.partition
        text = (f"{split_tool} --ranges {shlex.quote(edge.path)} "
                f"{fanout} {index} > \"$__sp_dir/e{eid}\"")
        plan.spawns.append(Spawn(text, produced_fifos=[eid]))

    status_ids: set[int] = set()
    if status_source is not None:
        for node in g.nodes.values():
            if node.node_id == status_source:
                status_ids.add(node.node_id)
            elif node.origin[0] in ("stateless-copy", "map") and \
                    node.origin[1] == status_source:
                status_ids.add(node.node_id)

    for nid in g.topo_order():
        node = g.nodes[nid]
        spawn = _spawn_for(g, node, ref, stdin_redirect, stdout_redirect,
                           options, fifo_ids)
        index = len(plan.spawns)
        plan.spawns.append(spawn)
        if any(g.edges[eid].consumer is None for eid in node.outputs):
            plan.output_pids.append(index)
        if nid in status_ids:
            plan.status_pids.append(index)
    return plan


def _spawn_for(g, node, ref, stdin_redirect, stdout_redirect, options,
               fifo_ids) -> Spawn:
    ins = [g.edges[e] for e in node.streaming_inputs]
    outs = [g.edges[e] for e in node.outputs]
    bits: list[str] = []
    redirects: list[str] = []

    def note_fifos(spawn: Spawn):
        spawn.consumed_fifos = [e.edge_id for e in ins if e.edge_id in fifo_ids]
        spawn.produced_fifos = [e.edge_id for e in outs if e.edge_id in fifo_ids]
        return spawn

    if node.kind == d.CAT:
        bits.append("cat")
        for edge in ins:
            if edge.kind == d.STDIN and edge.edge_id not in fifo_ids:
                bits.append("-")
                redirects.append(stdin_redirect(edge))
            else:
                bits.append(ref(edge))
    elif node.kind == d.RELAY:
        if node.eager:
            # the relay opens its output itself, lazily: a late FIFO reader
            # must not hold up input consumption
            bits.append(_runtime_argv("eager", options.runtime_mode))
            out = outs[0]
            if out.edge_id in fifo_ids or out.kind != d.STDOUT:
                bits.append(ref(out))
            redirects.append(stdin_redirect(ins[0]))
            return note_fifos(Spawn(" ".join(bits + redirects)))
        bits.append("cat")
        redirects.append(stdin_redirect(ins[0]))
    elif node.kind == d.SPLIT:
        bits.append(_runtime_argv("split", options.runtime_mode))
        bits.append(str(len(outs)))
        bits.extend(ref(e) for e in outs)
        redirects.append(stdin_redirect(ins[0]))
    elif node.kind == d.AGGREGATE:
        program, flags = node.agg
        bits.append(_runtime_argv(program, options.runtime_mode))
        bits.extend(shlex.quote(f) for f in flags)
        bits.extend(ref(e) for e in ins)
    elif node.kind in (d.COMMAND, d.MAP):
        inst = node.instance
        if node.input_slots is None:
            bits.append(shlex.quote(inst.name))
            bits.extend(shlex.quote(a) for a in inst.argv_without_input_operands())
            if ins:
                redirects.append(stdin_redirect(ins[0]))
        else:
            argv: list[str] = [shlex.quote(inst.name)]
            argv += [shlex.quote(a) for a in inst.argv]
            for edge, slot in zip(ins, node.input_slots):
                if slot.kind == "stdin":
                    redirects.append(stdin_redirect(edge))
                    if slot.arg_index is not None:
                        argv[slot.arg_index + 1] = "-"
                else:
                    argv[slot.arg_index + 1] = ref(edge)
            out_ref = inst.outputs[0] if inst.outputs else None
            if out_ref is not None and out_ref.kind == "file" \
                    and out_ref.arg_index is not None:
                argv[out_ref.arg_index + 1] = ref(outs[0])
                bits = argv
                spawn = Spawn(" ".join(bits + redirects))
                return note_fifos(spawn)
            bits = argv
    else:
        raise EmitError(f"unemittable node kind {node.kind!r}")

    if node.kind != d.SPLIT:
        for edge in outs:
            out = stdout_redirect(edge)
            if out:
                redirects.append(out)
    return note_fifos(Spawn(" ".join(bits + redirects)))


def render_fragment(plan: EmitPlan, options: EmitOptions, label: str = "") -> str:
    """Render an EmitPlan as a parenthesized shell fragment."""
    lines: list[str] = ["("]
    if label:
        lines.append(f"# shpar fragment: {label}")
    lines.append("set +e")
    lines.append('__sp_dir=$(mktemp -d "${TMPDIR:-/tmp}/shpar-XXXXXXXX") || exit 1')
    lines.append("__sp_pids=()")
    lines.append("trap 'kill -TERM \"${__sp_pids[@]}\" 2>/dev/null; "
                 "rm -rf \"$__sp_dir\"' EXIT")
    if plan.fifo_edges:
        paths = " ".join(f'"$__sp_dir/e{e}"' for e in plan.fifo_edges)
        lines.append(f"mkfifo {paths} || exit 1")
    if plan.uses_stdin:
        lines.append("exec 9<&0")
    drain = options.termination == "drain_stream"
    if drain:
        lines.append("declare -A __sp_prod __sp_cons")
    for index, spawn in enumerate(plan.spawns):
        lines.append(f"{spawn.text} &")
        lines.append("__sp_pids+=($!)")
        if drain:
            for eid in spawn.produced_fifos:
                lines.append(f"__sp_prod[{eid}]=$!")
            for eid in spawn.consumed_fifos:
                lines.append(f"__sp_cons[{eid}]=$!")
    out_waits = [i for i in plan.output_pids if i not in plan.status_pids]
    lines.append("__sp_st=0")
    for index in out_waits:
        lines.append(f'wait "${{__sp_pids[{index}]}}"; __sp_st=$?')
    if plan.status_pids:
        lines.append("__sp_hi=0; __sp_any0=0")
        for index in plan.status_pids:
            lines.append(f'wait "${{__sp_pids[{index}]}}"; __sp_rc=$?')
            lines.append('[ "$__sp_rc" -eq 0 ] && __sp_any0=1; '
                         '[ "$__sp_rc" -gt "$__sp_hi" ] && __sp_hi=$__sp_rc')
        lines.append('if [ "$__sp_hi" -ge 2 ]; then __sp_st=$__sp_hi; '
                     'elif [ "$__sp_any0" -eq 1 ]; then __sp_st=0; '
                     'else __sp_st=1; fi')
    if drain:
        # attach drain relays to fifos whose consumer died with the producer
        # still running, then let every stream run to depletion
        lines.append('for __sp_e in "${!__sp_prod[@]}"; do')
        lines.append('  __sp_p=${__sp_prod[$__sp_e]}; __sp_c=${__sp_cons[$__sp_e]:-}')
        lines.append('  if kill -0 "$__sp_p" 2>/dev/null && '
                     '{ [ -z "$__sp_c" ] || ! kill -0 "$__sp_c" 2>/dev/null; }; then')
        lines.append('    cat "$__sp_dir/e$__sp_e" > /dev/null &')
        lines.append("  fi")
        lines.append("done")
        lines.append("wait")
    else:
        # deliver PIPE upstream; escalate to TERM after a grace period
        lines.append('for __sp_p in "${__sp_pids[@]}"; do '
                     'kill -PIPE "$__sp_p" 2>/dev/null; done')
        lines.append("__sp_left=0")
        lines.append(f"for __sp_i in $(seq 1 {options.grace_ticks}); do")
        lines.append("  __sp_left=0")
        lines.append('  for __sp_p in "${__sp_pids[@]}"; do '
                     'kill -0 "$__sp_p" 2>/dev/null && __sp_left=1; done')
        lines.append('  [ "$__sp_left" -eq 0 ] && break')
        lines.append("  sleep 0.1")
        lines.append("done")
        lines.append('if [ "$__sp_left" -eq 1 ]; then for __sp_p in '
                     '"${__sp_pids[@]}"; do kill -TERM "$__sp_p" 2>/dev/null; '
                     "done; fi")
    lines.append('rm -rf "$__sp_dir"')
    lines.append("trap - EXIT")
    lines.append('exit "$__sp_st"')
    lines.append(")")
    return "\n".join(lines)


def emit_script(g: d.Dfg, options: EmitOptions | None = None,
                status_source: int | None = None, label: str = "") -> str:
    """Lower one expanded graph to an executable fragment."""
    options = options or EmitOptions()
    if not g.nodes:
        return ""
    plan = build_plan(g, options, status_source)
    return render_fragment(plan, options, label)


# -- whole-program emission ----------------------------------------------------

@dataclass
class CompiledFragment:
    region: DataflowRegion
    text: str


def emit_program(ast: Sequence, fragments: list[CompiledFragment]) -> str:
    """Reproduce the script with compiled regions swapped in; everything
    outside regions is unparsed verbatim."""
    by_statement: dict[int, CompiledFragment] = {}
    covered_statements: dict[int, CompiledFragment] = {}
    part_of: dict[int, list[tuple[RegionPart, CompiledFragment]]] = {}
    for frag in fragments:
        first = True
        for part in frag.region.parts:
            pid = id(part.pipeline)
            if part.whole_pipeline and len(frag.region.parts) >= 1 and \
                    all(p.whole_pipeline for p in frag.region.parts):
                if first:
                    by_statement[pid] = frag
                    first = False
                else:
                    covered_statements[pid] = frag
            else:
                part_of.setdefault(pid, []).append((part, frag))

    def render_pipeline(node: Pipeline) -> str | None:
        pid = id(node)
        if pid in covered_statements:
            return None  # merged into an earlier statement's fragment
        if pid in by_statement:
            frag = by_statement[pid]
            text = frag.text
            if frag.region.background:
                return f"{text} &"
            if node.background and len(frag.region.parts) == 1:
                return f"{text} &"
            return text
        replacements = part_of.get(pid)
        if not replacements:
            return unparse(node)
        pieces: list[str] = []
        index = 0
        while index < len(node.commands):
            hit = next((p for p, _ in replacements if p.start == index), None)
            if hit is not None:
                frag = next(f for p, f in replacements if p is hit)
                pieces.append(frag.text)
                index = hit.end
            else:
                pieces.append(unparse(node.commands[index]))
                index += 1
        text = " | ".join(pieces)
        return f"{text} &" if node.background else text

    def render(node: Node) -> str | None:
        if isinstance(node, Sequence):
            rendered = [render(item) for item in node.items]
            return "\n".join(r for r in rendered if r is not None)
        if isinstance(node, Pipeline):
            return render_pipeline(node)
        if isinstance(node, AndOr):
            left = render(node.left)
            right = render(node.right)
            return f"{left} {node.op} {right}"
        if isinstance(node, Background):
            return f"{render(node.child)} &"
        if isinstance(node, ForLoop):
            head = f"for {node.var} in {' '.join(w.raw for w in node.words)}; do"
            body = render(node.body)
            tail = "done" + "".join(" " + r.render() for r in node.redirections)
            return f"{head}\n{body}\n{tail}"
        if isinstance(node, Subshell):
            redirs = "".join(" " + r.render() for r in node.redirections)
            return f"( {render(node.body)} ){redirs}"
        if isinstance(node, (SimpleCommand, Assignment, Unparsed)):
            return unparse(node)
        raise EmitError(f"cannot render {type(node).__name__}")

    return render(ast) or ""
