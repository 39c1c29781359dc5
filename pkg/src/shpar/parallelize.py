"""Width-expanding, semantics-preserving graph transformations.

A stateless node fed by a concatenation is replaced by per-input copies with
the concatenation commuted after them; a parallelizable-pure node becomes
map copies feeding a balanced binary tree of two-input aggregators.  The
auxiliary transformations insert the cat/split/relay scaffolding that makes
those two rules applicable.  All transformations are partial and safe: when
a precondition fails the graph is returned unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import dfg as d
from .aggregators import AggregatorPair, aggregator_for
from .annotations.model import Class, CommandInstance, StreamRef


@dataclass
class WidthConfig:
    requested: int | None  # None = auto
    detected_cpus: int

    @property
    def effective(self) -> int:
        if self.requested is not None:
            return max(1, self.requested)
        return default_width(self.detected_cpus)


def default_width(cpu_cores: int) -> int:
    """Conservative default parallelism for a machine size."""
    if cpu_cores <= 1:
        return 1
    if cpu_cores <= 16:
        return 2
    return cpu_cores // 8


@dataclass
class ExpandOptions:
    no_eager: bool = False


@dataclass
class TransformReport:
    region: str = ""
    nodes_before: int = 0
    nodes_after: int = 0
    applied: list[str] = field(default_factory=list)
    skipped: list[tuple[str, str]] = field(default_factory=list)
    provenance: dict[int, tuple] = field(default_factory=dict)

    def summary(self) -> str:
        lines = [f"region {self.region}: {self.nodes_before} -> "
                 f"{self.nodes_after} nodes"]
        lines += [f"  applied {step}" for step in self.applied]
        lines += [f"  skipped {label}: {why}" for label, why in self.skipped]
        return "\n".join(lines)


# -- helpers -------------------------------------------------------------------

def _parallel_mode(node: d.DfgNode) -> tuple[str, AggregatorPair | None] | None:
    """('stateless', None) | ('pure', pair) when the node can be widened."""
    if node.kind != d.COMMAND or node.instance is None:
        return None
    klass = node.instance.klass
    if klass is Class.STATELESS:
        return ("stateless", None)
    if klass is Class.PURE:
        pair = aggregator_for(node.instance)
        if pair is not None:
            return ("pure", pair)
    return None


def _skip_reason(node: d.DfgNode) -> str | None:
    if node.kind != d.COMMAND or node.instance is None:
        return None
    klass = node.instance.klass
    if klass is Class.N_PURE:
        return "non-parallelizable pure"
    if klass is Class.PURE and aggregator_for(node.instance) is None:
        return "no aggregator registered"
    return None


def _dup_config(g: d.Dfg, src: d.DfgNode, dst: d.DfgNode):
    for eid in src.config_inputs:
        edge = g.edges[eid]
        new = g.add_edge(edge.kind, path=edge.path, consumer=dst.node_id)
        dst.config_inputs.append(new.edge_id)


def _drop_node(g: d.Dfg, node: d.DfgNode):
    for eid in list(node.config_inputs):
        g.remove_edge(eid)
    g.remove_node(node.node_id)


# -- core transformations -------------------------------------------------------

def _stateless_here(g: d.Dfg, nid: int) -> bool:
    node = g.nodes.get(nid)
    if node is None or _parallel_mode(node) is None:
        return False
    mode, _ = _parallel_mode(node)
    if mode != "stateless" or len(node.streaming_inputs) != 1:
        return False
    cat = g.producer_of(node.streaming_inputs[0])
    if cat is None or cat.kind != d.CAT or len(cat.streaming_inputs) < 2:
        return False
    _commute(g, node, cat, None)
    return True


def _pure_here(g: d.Dfg, nid: int) -> bool:
    node = g.nodes.get(nid)
    if node is None:
        return False
    mode = _parallel_mode(node)
    if mode is None or mode[0] != "pure" or len(node.streaming_inputs) != 1:
        return False
    cat = g.producer_of(node.streaming_inputs[0])
    if cat is None or cat.kind != d.CAT or len(cat.streaming_inputs) < 2:
        return False
    _commute(g, node, cat, mode[1])
    return True


def _commute(g: d.Dfg, node: d.DfgNode, cat: d.DfgNode,
             pair: AggregatorPair | None):
    """Replace cat->node with per-input copies; concatenate stateless copies
    in input order, or aggregate map copies through a balanced binary tree."""
    in_edges = list(cat.streaming_inputs)
    mid_edge = node.streaming_inputs[0]
    out_edge = g.edges[node.outputs[0]]

    if pair is None:
        instance = node.instance
        make = lambda: g.add_node(
            d.COMMAND, instance=instance, input_slots=None,
            origin=("stateless-copy", node.node_id), expanded=True,
        )
    else:
        instance = CommandInstance(
            name=pair.map_argv[0],
            argv=pair.map_argv[1:],
            klass=Class.PURE,
            inputs=[StreamRef("stdin")],
            outputs=[StreamRef("stdout")],
        )
        make = lambda: g.add_node(
            d.MAP, instance=instance, input_slots=None,
            origin=("map", node.node_id), expanded=True,
        )

    stage_edges: list[int] = []
    for eid in in_edges:
        copy = make()
        g.edges[eid].consumer = copy.node_id
        copy.streaming_inputs = [eid]
        _dup_config(g, node, copy)
        out = g.add_edge(d.PIPE, producer=copy.node_id)
        copy.outputs = [out.edge_id]
        stage_edges.append(out.edge_id)

    if pair is None:
        new_cat = g.add_node(d.CAT, origin=("commuted-cat", node.node_id),
                             expanded=True)
        for eid in stage_edges:
            g.edges[eid].consumer = new_cat.node_id
        new_cat.streaming_inputs = stage_edges
        new_cat.outputs = [out_edge.edge_id]
        out_edge.producer = new_cat.node_id
    else:
        level = stage_edges
        while len(level) > 1:
            nxt: list[int] = []
            i = 0
            while i < len(level):
                if i + 1 < len(level):
                    agg = g.add_node(
                        d.AGGREGATE, agg=(pair.agg_program, list(pair.agg_flags)),
                        origin=("aggregate", node.node_id), expanded=True,
                    )
                    for eid in (level[i], level[i + 1]):
                        g.edges[eid].consumer = agg.node_id
                    agg.streaming_inputs = [level[i], level[i + 1]]
                    out = g.add_edge(d.PIPE, producer=agg.node_id)
                    agg.outputs = [out.edge_id]
                    nxt.append(out.edge_id)
                    i += 2
                else:
                    nxt.append(level[i])
                    i += 1
            level = nxt
        root = g.edges[level[0]]
        root_producer = g.nodes[root.producer]
        root_producer.outputs = [out_edge.edge_id]
        out_edge.producer = root_producer.node_id
        g.remove_edge(root.edge_id)

    g.remove_edge(mid_edge)
    _drop_node(g, node)
    _drop_node(g, cat)


def _t1_here(g: d.Dfg, nid: int) -> bool:
    node = g.nodes.get(nid)
    if node is None or len(node.streaming_inputs) < 2:
        return False
    cat = g.add_node(d.CAT, origin=("t1", nid), expanded=True)
    for eid in node.streaming_inputs:
        g.edges[eid].consumer = cat.node_id
    cat.streaming_inputs = list(node.streaming_inputs)
    mid = g.add_edge(d.PIPE, producer=cat.node_id, consumer=nid)
    cat.outputs = [mid.edge_id]
    node.streaming_inputs = [mid.edge_id]
    node.input_slots = None
    return True


def _t2_here(g: d.Dfg, nid: int, width: int) -> bool:
    node = g.nodes.get(nid)
    if node is None or width < 2 or len(node.streaming_inputs) != 1:
        return False
    eid = node.streaming_inputs[0]
    edge = g.edges[eid]
    cat = g.add_node(d.CAT, origin=("t2-cat", nid), expanded=True)
    if edge.producer is None and edge.kind == d.NAMED_FILE and edge.partition is None:
        # static regular file: partition at emission, no runtime split node
        parts = []
        for index in range(width):
            part = g.add_edge(d.NAMED_FILE, path=edge.path,
                              partition=(width, index), consumer=cat.node_id)
            parts.append(part.edge_id)
        cat.streaming_inputs = parts
        g.remove_edge(eid)
    else:
        split = g.add_node(d.SPLIT, origin=("t2-split", nid), expanded=True)
        edge.consumer = split.node_id
        split.streaming_inputs = [eid]
        outs = []
        for _ in range(width):
            out = g.add_edge(d.PIPE, producer=split.node_id, consumer=cat.node_id)
            outs.append(out.edge_id)
        split.outputs = outs
        cat.streaming_inputs = list(outs)
    mid = g.add_edge(d.PIPE, producer=cat.node_id, consumer=nid)
    cat.outputs = [mid.edge_id]
    node.streaming_inputs = [mid.edge_id]
    node.input_slots = None
    return True


def _t3_here(g: d.Dfg, eid: int, eager: bool = False) -> bool:
    edge = g.edges.get(eid)
    if edge is None:
        return False
    relay = g.add_node(d.RELAY, eager=eager, expanded=True, origin=("t3", eid))
    if edge.producer is None:
        up = g.add_edge(edge.kind, path=edge.path, partition=edge.partition,
                        consumer=relay.node_id)
        if edge.consumer is not None:
            edge.kind, edge.path, edge.partition = d.PIPE, None, None
    else:
        up = g.add_edge(d.PIPE, producer=edge.producer, consumer=relay.node_id)
        producer = g.nodes[edge.producer]
        producer.outputs[producer.outputs.index(eid)] = up.edge_id
    edge.producer = relay.node_id
    relay.streaming_inputs = [up.edge_id]
    relay.outputs = [eid]
    return True


def _regroup_cat(g: d.Dfg, nid: int, width: int) -> bool:
    cat = g.nodes.get(nid)
    if cat is None or cat.kind != d.CAT or len(cat.streaming_inputs) <= width:
        return False
    ins = list(cat.streaming_inputs)
    base, extra = divmod(len(ins), width)
    new_inputs: list[int] = []
    at = 0
    for i in range(width):
        size = base + 1 if i < extra else base
        group = ins[at:at + size]
        at += size
        if len(group) == 1:
            new_inputs.append(group[0])
            continue
        sub = g.add_node(d.CAT, origin=("regroup", nid), expanded=True)
        for eid in group:
            g.edges[eid].consumer = sub.node_id
        sub.streaming_inputs = group
        mid = g.add_edge(d.PIPE, producer=sub.node_id, consumer=nid)
        sub.outputs = [mid.edge_id]
        new_inputs.append(mid.edge_id)
    cat.streaming_inputs = new_inputs
    cat.input_slots = None
    return True


def _absorb_unary_cats(g: d.Dfg) -> bool:
    changed = False
    for nid in sorted(g.nodes):
        node = g.nodes.get(nid)
        if node is None or node.kind != d.CAT or len(node.streaming_inputs) != 1:
            continue
        if node.config_inputs:
            continue
        out = g.edges[node.outputs[0]]
        if out.consumer is None:
            continue  # the cat is doing the region's work; leave it
        in_edge = g.edges[node.streaming_inputs[0]]
        consumer = g.nodes[out.consumer]
        ports = consumer.streaming_inputs
        ports[ports.index(out.edge_id)] = in_edge.edge_id
        in_edge.consumer = consumer.node_id
        g.remove_edge(out.edge_id)
        _drop_node(g, node)
        changed = True
    return changed


# -- public single-step operations (pure: return a new graph) -------------------

def parallelize_stateless(g: d.Dfg, node_id: int) -> d.Dfg:
    out = g.clone()
    _stateless_here(out, node_id)
    return out


def parallelize_pure(g: d.Dfg, node_id: int) -> d.Dfg:
    out = g.clone()
    _pure_here(out, node_id)
    return out


def aux_t1_insert_cat(g: d.Dfg, node_id: int) -> d.Dfg:
    out = g.clone()
    node = out.nodes.get(node_id)
    if node is not None and len(node.streaming_inputs) >= 2:
        _t1_here(out, node_id)
    return out


def aux_t2_split_cat(g: d.Dfg, node_id: int, width: int) -> d.Dfg:
    out = g.clone()
    _t2_here(out, node_id, width)
    return out


def aux_t3_insert_relay(g: d.Dfg, edge_id: int, eager: bool = False) -> d.Dfg:
    out = g.clone()
    _t3_here(out, edge_id, eager)
    return out


# -- the driver ------------------------------------------------------------------

_MAX_PASSES = 10_000


def expand(g: d.Dfg, width: int, options: ExpandOptions | None = None):
    """Fixpoint application of the parallelization and auxiliary
    transformations up to the requested width.  Returns (graph, report)."""
    options = options or ExpandOptions()
    out = g.clone()
    report = TransformReport(region=g.provenance, nodes_before=len(g.nodes))

    def parallelizable(node: d.DfgNode) -> bool:
        return _parallel_mode(node) is not None

    def will_expand(node: d.DfgNode) -> bool:
        return (
            node.kind == d.COMMAND
            and not node.expanded
            and parallelizable(node)
        )

    def one_step(aggressive: bool) -> str | None:
        if _absorb_unary_cats(out):
            return "absorb-unary-cat"
        for nid in out.topo_order():
            node = out.nodes[nid]
            if node.kind == d.CAT and _regroup_cat(out, nid, width):
                return f"regroup-cat(n{nid})"
            if node.kind != d.COMMAND or node.expanded:
                continue
            mode = _parallel_mode(node)
            if mode is None:
                continue
            ins = node.streaming_inputs
            if len(ins) == 0:
                continue
            if len(ins) > 1:
                if node.instance.concat_ok and _t1_here(out, nid):
                    return f"t1(n{nid})"
                continue
            edge = out.edges[ins[0]]
            producer = None if edge.producer is None else out.nodes[edge.producer]
            if producer is not None and producer.kind == d.CAT:
                n = len(producer.streaming_inputs)
                if n < 2:
                    continue
                if mode[0] == "stateless" and _stateless_here(out, nid):
                    return f"stateless(n{nid})x{n}"
                if mode[0] == "pure" and _pure_here(out, nid):
                    return f"map-aggregate(n{nid})x{n}"
                continue
            if width < 2 or edge.partition is not None:
                continue
            if producer is None:
                if _t2_here(out, nid, width):
                    kind = "file" if edge.kind == d.NAMED_FILE else "split"
                    return f"t2-{kind}(n{nid})"
                continue
            if producer.kind in (d.AGGREGATE, d.RELAY) or (
                producer.kind in (d.COMMAND, d.MAP) and not will_expand(producer)
            ):
                if _t2_here(out, nid, width):
                    return f"t2-split(n{nid})"
                continue
            if aggressive and _t2_here(out, nid, width):
                return f"t2-split(n{nid})"
        return None

    if width < 2:
        # degenerate width: the graph is already at its final shape
        for nid in sorted(out.nodes):
            report.provenance[nid] = out.nodes[nid].origin
        report.nodes_after = len(out.nodes)
        return out, report

    for _ in range(_MAX_PASSES):
        step = one_step(aggressive=False)
        if step is None:
            step = one_step(aggressive=True)
        if step is None:
            break
        report.applied.append(step)
    else:
        raise RuntimeError("expansion did not reach a fixpoint")

    if not options.no_eager:
        def already_eager(edge: d.DfgEdge, upstream: bool) -> bool:
            other = edge.producer if upstream else edge.consumer
            if other is None:
                return False
            node = out.nodes[other]
            return node.kind == d.RELAY and node.eager

        for nid in sorted(out.nodes):
            node = out.nodes[nid]
            if node.kind == d.AGGREGATE:
                for eid in list(node.streaming_inputs):
                    if not already_eager(out.edges[eid], upstream=True):
                        _t3_here(out, eid, eager=True)
            elif node.kind == d.SPLIT:
                for eid in list(node.outputs)[:-1]:
                    if not already_eager(out.edges[eid], upstream=False):
                        _t3_here(out, eid, eager=True)

    for nid in sorted(out.nodes):
        node = out.nodes[nid]
        reason = _skip_reason(node)
        if reason is not None and not node.expanded:
            report.skipped.append((node.label(), reason))
        report.provenance[nid] = node.origin
    report.nodes_after = len(out.nodes)
    return out, report
