"""Dataflow region discovery and translation to the graph IR.

Regions grow across `|` and `&`; `;`, `&&`, `||`, loops, and assignments are
barriers.  Commands whose arguments cannot be resolved at compile time, or
that classify as side-effectful/unknown, are excluded; exclusion shrinks or
demotes regions but never fails a compile.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from . import dfg as d
from .annotations.db import AnnotationDb, classify
from .annotations.model import Class, CommandInstance, StreamRef
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
)

# builtins that mutate shell state we track; their presence invalidates
# variable knowledge
VAR_MUTATORS = {
    "read", "export", "unset", "set", "eval", "source", ".", "declare",
    "local", "typeset", "shift", "getopts", "mapfile", "readarray", "cd",
}

_ASSIGN_RE = re.compile(r"(?:^|[;&|(\s])([A-Za-z_]\w*)=")
_MUTATOR_RE = re.compile(r"\b(" + "|".join(m for m in VAR_MUTATORS if m != ".") + r")\b")


@dataclass
class ResolvedCommand:
    node: SimpleCommand
    argv: list[str]  # [name, args...]
    redirs: list[tuple[str, str]]  # (op, path) with op in '<', '>', '>>'
    instance: CommandInstance | None = None

    @property
    def name(self) -> str:
        return self.argv[0]


@dataclass
class RegionPart:
    pipeline: Pipeline
    start: int
    end: int  # exclusive command index
    commands: list[ResolvedCommand]

    @property
    def at_pipeline_start(self) -> bool:
        return self.start == 0

    @property
    def at_pipeline_end(self) -> bool:
        return self.end == len(self.pipeline.commands)

    @property
    def whole_pipeline(self) -> bool:
        return self.at_pipeline_start and self.at_pipeline_end


@dataclass
class DataflowRegion:
    region_id: int
    parts: list[RegionPart]
    background: bool = False
    input_ids: list[str] = field(default_factory=list)
    output_ids: list[str] = field(default_factory=list)

    @property
    def statements(self) -> list[Pipeline]:
        return [p.pipeline for p in self.parts]


@dataclass
class Demotion:
    where: str
    reason: str


@dataclass
class RegionAnalysis:
    ast: Sequence
    regions: list[DataflowRegion]
    demotions: list[Demotion]


def find_dataflow_regions(ast: Sequence, db: AnnotationDb) -> RegionAnalysis:
    """Mark maximal dataflow regions on the AST.

    Unknown constructs shrink regions, never fail.
    """
    analysis = RegionAnalysis(ast, [], [])
    _walk_items(ast.items, {}, db, analysis)
    return analysis


# -- variable knowledge -------------------------------------------------------

def _collect_assigned(node: Node) -> set[str] | None:
    """Names a subtree may assign; None means 'anything'."""
    names: set[str] = set()
    stack = [node]
    while stack:
        cur = stack.pop()
        if isinstance(cur, Assignment):
            names.add(cur.name)
        elif isinstance(cur, SimpleCommand):
            if cur.name in VAR_MUTATORS:
                return None
            if cur.prefix_assignments:
                for w in cur.prefix_assignments:
                    names.add(w.raw.split("=", 1)[0])
        elif isinstance(cur, Unparsed):
            if _MUTATOR_RE.search(cur.text):
                return None
            names.update(m.group(1) for m in _ASSIGN_RE.finditer(cur.text))
        elif isinstance(cur, Sequence):
            stack.extend(cur.items)
        elif isinstance(cur, Background):
            stack.append(cur.child)
        elif isinstance(cur, AndOr):
            stack.extend((cur.left, cur.right))
        elif isinstance(cur, Pipeline):
            stack.extend(cur.commands)
        elif isinstance(cur, ForLoop):
            names.add(cur.var)
            stack.append(cur.body)
        elif isinstance(cur, Subshell):
            pass  # subshell assignments do not escape
    return names


def _invalidate(env: dict[str, str], names: set[str] | None):
    if names is None:
        env.clear()
    else:
        for name in names:
            env.pop(name, None)


# -- statement walk -----------------------------------------------------------

def _walk_items(items: list[Node], env: dict[str, str], db: AnnotationDb,
                out: RegionAnalysis):
    group: list[Pipeline] = []

    def flush(foreground: Pipeline | None):
        members = group + ([foreground] if foreground is not None else [])
        if members:
            _process_group(members, env, db, out)
        group.clear()

    for item in items:
        if isinstance(item, Pipeline):
            if item.background:
                group.append(item)
                continue
            flush(item)
        else:
            flush(None)
            if isinstance(item, Assignment):
                value = item.value.literal_value(env)
                if value is None:
                    env.pop(item.name, None)
                else:
                    env[item.name] = value
            elif isinstance(item, AndOr):
                _walk_andor(item, env, db, out)
            elif isinstance(item, Background):
                _walk_items([item.child] if not isinstance(item.child, Sequence)
                            else item.child.items, dict(env), db, out)
            elif isinstance(item, ForLoop):
                body_env = dict(env)
                _invalidate(body_env, _collect_assigned(item))
                _walk_items(item.body.items, body_env, db, out)
                _invalidate(env, _collect_assigned(item))
            elif isinstance(item, Subshell):
                _walk_items(item.body.items, dict(env), db, out)
            elif isinstance(item, Unparsed):
                env.clear()
    flush(None)


def _walk_andor(node: AndOr, env: dict[str, str], db: AnnotationDb,
                out: RegionAnalysis):
    # left always executes; right conditionally
    for side, conditional in ((node.left, False), (node.right, True)):
        sub_env = dict(env) if conditional else env
        if isinstance(side, Pipeline):
            _process_group([side], sub_env, db, out)
        elif isinstance(side, AndOr):
            _walk_andor(side, sub_env, db, out)
        else:
            _walk_items([side], sub_env, db, out)
        if conditional:
            _invalidate(env, _collect_assigned(side))


# -- pipeline resolution ------------------------------------------------------

def _resolve_command(node: Node, env: dict[str, str], db: AnnotationDb):
    """ResolvedCommand, or a string explaining exclusion."""
    if not isinstance(node, SimpleCommand):
        return "unsupported construct inside pipeline"
    if node.prefix_assignments:
        return "environment-modifying prefix assignment"
    if not node.words:
        return "no command word"
    argv = []
    for word in node.words:
        value = word.literal_value(env)
        if value is None:
            return f"argument {word.raw!r} not resolvable at compile time"
        argv.append(value)
    redirs: list[tuple[str, str]] = []
    for redir in node.redirections:
        if redir.op not in ("<", ">", ">>") or redir.fd not in (None, 0, 1):
            return f"redirection {redir.render()!r} outside supported forms"
        if redir.fd == 0 and redir.op != "<":
            return f"redirection {redir.render()!r} outside supported forms"
        if redir.fd == 1 and redir.op == "<":
            return f"redirection {redir.render()!r} outside supported forms"
        target = redir.target.literal_value(env)
        if target is None:
            return f"redirection target {redir.target.raw!r} not resolvable"
        redirs.append((redir.op, target))
    if len([1 for op, _ in redirs if op == "<"]) > 1:
        return "multiple input redirections"
    if len([1 for op, _ in redirs if op in (">", ">>")]) > 1:
        return "multiple output redirections"
    instance = classify(argv[0], argv[1:], db)
    if not instance.klass.in_dfg:
        return f"{argv[0]}: side-effectful or unannotated"
    return ResolvedCommand(node, argv, redirs, instance)


def _touched_paths(rc: ResolvedCommand) -> set[str]:
    paths = {ref.path for ref in rc.instance.inputs if ref.kind == "file"}
    paths |= {ref.path for ref in rc.instance.outputs if ref.kind == "file"}
    paths |= set(rc.instance.config_paths)
    paths |= {path for _, path in rc.redirs}
    return paths


def _process_group(members: list[Pipeline], env: dict[str, str],
                   db: AnnotationDb, out: RegionAnalysis):
    resolved: list[list[ResolvedCommand | str]] = [
        [_resolve_command(c, env, db) for c in p.commands] for p in members
    ]

    # variable-mutating builtins anywhere invalidate knowledge afterwards
    def post_invalidate():
        for pipeline in members:
            for cmd in pipeline.commands:
                if isinstance(cmd, SimpleCommand) and cmd.name in VAR_MUTATORS:
                    env.clear()
                    return

    fully_ok = [i for i, cmds in enumerate(resolved)
                if all(isinstance(c, ResolvedCommand) for c in cmds)]
    # connect fully-resolved pipelines that share file identifiers
    component: dict[int, int] = {i: i for i in fully_ok}

    def find(i):
        while component[i] != i:
            component[i] = component[component[i]]
            i = component[i]
        return i

    paths_of = {
        i: set().union(*[_touched_paths(c) for c in resolved[i]]) if resolved[i] else set()
        for i in fully_ok
    }
    for i in fully_ok:
        for j in fully_ok:
            if i < j and paths_of[i] & paths_of[j]:
                component[find(i)] = find(j)

    groups: dict[int, list[int]] = {}
    for i in fully_ok:
        groups.setdefault(find(i), []).append(i)

    handled: set[int] = set()
    for ids in groups.values():
        if len(ids) < 2:
            continue
        parts = [
            RegionPart(members[i], 0, len(members[i].commands), resolved[i])
            for i in sorted(ids)
        ]
        background = all(members[i].background for i in ids)
        out.regions.append(DataflowRegion(len(out.regions), parts, background))
        handled.update(ids)

    for i, pipeline in enumerate(members):
        if i in handled:
            continue
        _process_pipeline(pipeline, resolved[i], out)
    post_invalidate()


def _process_pipeline(pipeline: Pipeline, resolved: list[ResolvedCommand | str],
                      out: RegionAnalysis):
    included = [isinstance(r, ResolvedCommand) for r in resolved]
    if any(included) and not all(included):
        for r, cmd in zip(resolved, pipeline.commands):
            if isinstance(r, str):
                name = cmd.name if isinstance(cmd, SimpleCommand) else "<compound>"
                out.demotions.append(Demotion(f"command {name!r}", r))
    elif not any(included):
        # a lone annotated-but-unresolvable command is still a missed region
        for r, cmd in zip(resolved, pipeline.commands):
            if isinstance(r, str) and "not resolvable" in r:
                out.demotions.append(Demotion(f"command {cmd.name!r}", r))
        return
    start = None
    for idx in range(len(resolved) + 1):
        inside = idx < len(resolved) and included[idx]
        if inside and start is None:
            start = idx
        elif not inside and start is not None:
            part = RegionPart(pipeline, start, idx, resolved[start:idx])
            background = part.whole_pipeline and pipeline.background
            out.regions.append(
                DataflowRegion(len(out.regions), [part], background=background)
            )
            start = None


# -- region to DFG ------------------------------------------------------------

class _Demoted(Exception):
    pass


def region_to_dfg(region: DataflowRegion, db: AnnotationDb):
    """Translate a region to a DFG.  Returns (graph, None) or (None, reason)
    when the region must be demoted (side-effectful command, structural
    conflict); demotions never raise."""
    try:
        graph = _build(region, db)
    except _Demoted as exc:
        return None, str(exc)
    issues = graph.validate()
    if issues:
        return None, "; ".join(issues)
    region.input_ids = [e.path or "stdin" for e in graph.input_edges()
                        if e.partition is None]
    region.output_ids = [e.path or "stdout" for e in graph.output_edges()]
    return graph, None


def _build(region: DataflowRegion, db: AnnotationDb) -> d.Dfg:
    graph = d.Dfg(provenance=f"region-{region.region_id}")
    # symbolic ports: (node_id, slot, symbol); resolved to edges afterwards
    in_ports: list[tuple[int, StreamRef, tuple]] = []
    config_ports: list[tuple[int, str]] = []
    out_ports: list[tuple[int, tuple]] = []
    pipe_serial = 0

    for part in region.parts:
        prev_pipe: tuple | None = None
        for pos, rc in enumerate(part.commands):
            inst = rc.instance or classify(rc.argv[0], rc.argv[1:], db)
            if not inst.klass.in_dfg:
                raise _Demoted(f"{rc.name}: side-effectful or unknown")
            first = pos == 0
            last = pos == len(part.commands) - 1
            kind = d.CAT if (
                inst.name == "cat" and inst.klass is Class.STATELESS
                and inst.outputs and inst.outputs[0].kind == "stdout"
            ) else d.COMMAND
            node = graph.add_node(kind, instance=inst,
                                  input_slots=list(inst.inputs),
                                  origin=("source", rc.name))

            in_redirect = next((p for op, p in rc.redirs if op == "<"), None)
            out_redirect = next(((p, op == ">>") for op, p in rc.redirs
                                 if op in (">", ">>")), None)

            consumed_pipe = False
            for ref in inst.inputs:
                if ref.kind == "file":
                    in_ports.append((node.node_id, ref, ("file", ref.path)))
                elif ref.kind == "stdin":
                    if in_redirect is not None:
                        in_ports.append((node.node_id, ref, ("file", in_redirect)))
                    elif not first and prev_pipe is not None:
                        in_ports.append((node.node_id, ref, prev_pipe))
                        consumed_pipe = True
                    else:
                        in_ports.append((node.node_id, ref, ("stdin",)))
            if not first and prev_pipe is not None and not consumed_pipe:
                raise _Demoted(f"{rc.name}: ignores its pipeline input")
            for path in inst.config_paths:
                config_ports.append((node.node_id, path))

            file_outputs = [r for r in inst.outputs if r.kind == "file"]
            stdout_output = any(r.kind == "stdout" for r in inst.outputs)
            if file_outputs and (out_redirect or not last or not stdout_output and len(file_outputs) > 1):
                raise _Demoted(f"{rc.name}: unsupported output-operand position")
            if file_outputs:
                out_ports.append((node.node_id, ("file", file_outputs[0].path, False,
                                                 file_outputs[0])))
                prev_pipe = None
            elif not last:
                if out_redirect is not None:
                    raise _Demoted(f"{rc.name}: mid-pipeline output redirection")
                pipe_serial += 1
                prev_pipe = ("pipe", pipe_serial)
                out_ports.append((node.node_id, prev_pipe))
            elif out_redirect is not None:
                path, append = out_redirect
                out_ports.append((node.node_id, ("file", path, append, None)))
            elif part.at_pipeline_end:
                out_ports.append((node.node_id, ("stdout",)))
            else:
                # run ends before an excluded command: feed it via fragment stdout
                out_ports.append((node.node_id, ("stdout",)))

    _materialize(graph, in_ports, config_ports, out_ports)
    return graph


def _materialize(graph: d.Dfg, in_ports, config_ports, out_ports):
    producers: dict[tuple, list[tuple[int, tuple]]] = {}
    for node_id, sym in out_ports:
        key = sym[:2] if sym[0] == "file" else sym
        producers.setdefault(key, []).append((node_id, sym))

    stdin_edge: d.DfgEdge | None = None
    consumed_keys: dict[tuple, d.DfgEdge] = {}

    def attach_input(node_id: int, slot: StreamRef, sym: tuple) -> d.DfgEdge:
        nonlocal stdin_edge
        if sym[0] == "stdin":
            if stdin_edge is not None:
                raise _Demoted("two commands read the region's stdin")
            stdin_edge = graph.add_edge(d.STDIN, consumer=node_id)
            edge = stdin_edge
        elif sym[0] == "pipe":
            made = producers.get(sym)
            if not made:
                raise _Demoted("dangling pipe")
            edge = graph.add_edge(d.PIPE, producer=made[0][0], consumer=node_id)
            graph.nodes[made[0][0]].outputs.append(edge.edge_id)
            consumed_keys[sym] = edge
        else:
            _, path = sym
            made = producers.get(("file", path))
            if made:
                if ("file", path) in consumed_keys:
                    raise _Demoted(f"file {path!r} read twice within region")
                if len(made) > 1:
                    raise _Demoted(f"file {path!r} written twice within region")
                edge = graph.add_edge(d.NAMED_FILE, path=path,
                                      producer=made[0][0], consumer=node_id)
                graph.nodes[made[0][0]].outputs.append(edge.edge_id)
                consumed_keys[("file", path)] = edge
            else:
                edge = graph.add_edge(d.NAMED_FILE, path=path, consumer=node_id)
        node = graph.nodes[node_id]
        node.streaming_inputs.append(edge.edge_id)
        return edge

    for node_id, slot, sym in in_ports:
        attach_input(node_id, slot, sym)

    for node_id, path in config_ports:
        if ("file", path) in producers:
            raise _Demoted(f"configuration input {path!r} produced inside region")
        edge = graph.add_edge(d.NAMED_FILE, path=path, consumer=node_id)
        graph.nodes[node_id].config_inputs.append(edge.edge_id)

    # remaining producer symbols become graph outputs
    for key, made in producers.items():
        for node_id, sym in made:
            if key in consumed_keys:
                continue
            if sym[0] == "stdout":
                edge = graph.add_edge(d.STDOUT, producer=node_id)
            elif sym[0] == "pipe":
                raise _Demoted("dangling pipe output")
            else:
                _, path, append, _slot = sym
                if len(made) > 1:
                    raise _Demoted(f"file {path!r} written twice within region")
                edge = graph.add_edge(d.NAMED_FILE, path=path, append=append,
                                      producer=node_id)
            graph.nodes[node_id].outputs.append(edge.edge_id)
