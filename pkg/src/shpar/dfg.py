"""Order-aware dataflow graph IR.

Edges are line streams (named files, pipes, or the region's stdin/stdout);
nodes are commands or runtime primitives.  Nodes list their configuration
inputs and an ordered streaming-input list; the graph encodes the order in
which each node reads its inputs.
"""

from __future__ import annotations

import json
from collections import Counter, deque
from dataclasses import dataclass, field, replace

from .annotations.model import CommandInstance, StreamRef

# edge kinds
NAMED_FILE = "named-file"
PIPE = "ephemeral-pipe"
FIFO = "fifo"
STDIN = "stdin"
STDOUT = "stdout"

# node kinds
COMMAND = "command"
CAT = "cat"
SPLIT = "split"
RELAY = "relay"
AGGREGATE = "aggregate"
MAP = "map"


@dataclass
class DfgEdge:
    edge_id: int
    kind: str
    producer: int | None = None
    consumer: int | None = None
    path: str | None = None
    append: bool = False
    # (fanout, index): compile-time line-aligned byte-range read of `path`,
    # wired at emission without a runtime split node
    partition: tuple[int, int] | None = None


@dataclass
class DfgNode:
    node_id: int
    kind: str
    instance: CommandInstance | None = None  # command / map nodes
    agg: tuple[str, list[str]] | None = None  # (program, flags) for aggregate
    eager: bool = False  # relay nodes
    config_inputs: list[int] = field(default_factory=list)
    streaming_inputs: list[int] = field(default_factory=list)
    outputs: list[int] = field(default_factory=list)
    # how streaming input edges map onto the instance argv; None means the
    # node reads a single restructured stdin stream
    input_slots: list[StreamRef] | None = None
    origin: tuple = ("source",)
    expanded: bool = False  # parallel copies never re-expand

    def label(self) -> str:
        if self.kind in (COMMAND, MAP) and self.instance is not None:
            return self.instance.name
        if self.kind == AGGREGATE and self.agg is not None:
            return self.agg[0]
        if self.kind == RELAY:
            return "eager" if self.eager else "relay"
        return self.kind


class Dfg:
    def __init__(self, provenance: str = ""):
        self.nodes: dict[int, DfgNode] = {}
        self.edges: dict[int, DfgEdge] = {}
        self.provenance = provenance
        self._next_node = 0
        self._next_edge = 0

    # -- construction ---------------------------------------------------

    def add_node(self, kind: str, **kw) -> DfgNode:
        node = DfgNode(node_id=self._next_node, kind=kind, **kw)
        self.nodes[node.node_id] = node
        self._next_node += 1
        return node

    def add_edge(self, kind: str, **kw) -> DfgEdge:
        edge = DfgEdge(edge_id=self._next_edge, kind=kind, **kw)
        self.edges[edge.edge_id] = edge
        self._next_edge += 1
        return edge

    def remove_node(self, node_id: int):
        del self.nodes[node_id]

    def remove_edge(self, edge_id: int):
        del self.edges[edge_id]

    def clone(self) -> "Dfg":
        g = Dfg(self.provenance)
        g._next_node = self._next_node
        g._next_edge = self._next_edge
        for nid, node in self.nodes.items():
            g.nodes[nid] = replace(
                node,
                config_inputs=list(node.config_inputs),
                streaming_inputs=list(node.streaming_inputs),
                outputs=list(node.outputs),
                input_slots=None if node.input_slots is None else list(node.input_slots),
            )
        for eid, edge in self.edges.items():
            g.edges[eid] = replace(edge)
        return g

    # -- queries ----------------------------------------------------------

    def input_edges(self) -> list[DfgEdge]:
        return [e for e in self._sorted_edges() if e.producer is None]

    def output_edges(self) -> list[DfgEdge]:
        return [e for e in self._sorted_edges() if e.consumer is None]

    def internal_edges(self) -> list[DfgEdge]:
        return [
            e for e in self._sorted_edges()
            if e.producer is not None and e.consumer is not None
        ]

    def _sorted_edges(self) -> list[DfgEdge]:
        return [self.edges[k] for k in sorted(self.edges)]

    def node_inputs(self, node: DfgNode) -> list[DfgEdge]:
        return [self.edges[e] for e in node.streaming_inputs]

    def producer_of(self, edge_id: int) -> DfgNode | None:
        p = self.edges[edge_id].producer
        return None if p is None else self.nodes[p]

    def consumer_of(self, edge_id: int) -> DfgNode | None:
        c = self.edges[edge_id].consumer
        return None if c is None else self.nodes[c]

    def topo_order(self) -> list[int]:
        """Deterministic topological order of node ids; raises on cycles."""
        order = self._kahn()
        if len(order) != len(self.nodes):
            raise ValueError("graph has a cycle")
        return order

    def _kahn(self) -> list[int]:
        indeg = {nid: 0 for nid in self.nodes}
        succs: dict[int, list[int]] = {nid: [] for nid in self.nodes}
        for edge in self.edges.values():
            if edge.producer is not None and edge.consumer is not None:
                succs[edge.producer].append(edge.consumer)
                indeg[edge.consumer] += 1
        ready = sorted(nid for nid, d in indeg.items() if d == 0)
        queue = deque(ready)
        order = []
        while queue:
            nid = queue.popleft()
            order.append(nid)
            pending = sorted(set(succs[nid]))
            for succ in pending:
                for _ in range(succs[nid].count(succ)):
                    indeg[succ] -= 1
                    if indeg[succ] == 0:
                        queue.append(succ)
        return order

    def census(self) -> Counter:
        """Node counts keyed by a human-readable label, for structure tests."""
        out: Counter = Counter()
        for node in self.nodes.values():
            if node.kind in (COMMAND, MAP):
                out[f"{node.kind}:{node.instance.name}"] += 1
            elif node.kind == AGGREGATE:
                out["aggregate"] += 1
            elif node.kind == RELAY:
                out["eager" if node.eager else "relay"] += 1
            else:
                out[node.kind] += 1
        return out

    # -- validation -------------------------------------------------------

    ARITY = {
        CAT: (1, None, 1, 1),
        SPLIT: (1, 1, 1, None),
        RELAY: (1, 1, 1, 1),
        AGGREGATE: (1, None, 1, 1),
        MAP: (1, 1, 1, 1),
        COMMAND: (0, None, 1, 1),
    }

    def validate(self) -> list[str]:
        """Structural validation; returns a list of violations (never raises)."""
        issues: list[str] = []
        # edge endpoint consistency with node port lists
        for edge in self.edges.values():
            eid = edge.edge_id
            if edge.producer is not None:
                node = self.nodes.get(edge.producer)
                if node is None:
                    issues.append(f"edge e{eid}: dangling producer n{edge.producer}")
                elif node.outputs.count(eid) != 1:
                    issues.append(f"edge e{eid}: not listed once by producer n{node.node_id}")
            if edge.consumer is not None:
                node = self.nodes.get(edge.consumer)
                if node is None:
                    issues.append(f"edge e{eid}: dangling consumer n{edge.consumer}")
                else:
                    count = node.streaming_inputs.count(eid) + node.config_inputs.count(eid)
                    if count != 1:
                        issues.append(
                            f"edge e{eid}: listed {count} times by consumer n{node.node_id}"
                        )
        seen_owner: dict[int, int] = {}
        for node in self.nodes.values():
            for eid in node.streaming_inputs + node.config_inputs:
                edge = self.edges.get(eid)
                if edge is None:
                    issues.append(f"node n{node.node_id}: unknown input edge e{eid}")
                    continue
                if edge.consumer != node.node_id:
                    issues.append(f"edge fan-out: e{eid} consumed by n{node.node_id} "
                                  f"but owned by n{edge.consumer}")
                if eid in seen_owner and seen_owner[eid] != node.node_id:
                    issues.append(f"edge fan-out: e{eid} consumed twice")
                seen_owner[eid] = node.node_id
            for eid in node.outputs:
                edge = self.edges.get(eid)
                if edge is None:
                    issues.append(f"node n{node.node_id}: unknown output edge e{eid}")
                elif edge.producer != node.node_id:
                    issues.append(f"edge fan-in: e{eid} produced by n{node.node_id} "
                                  f"but owned by n{edge.producer}")
        # arity
        for node in self.nodes.values():
            spec = self.ARITY.get(node.kind)
            if spec is None:
                issues.append(f"node n{node.node_id}: unknown kind {node.kind}")
                continue
            in_lo, in_hi, out_lo, out_hi = spec
            n_in, n_out = len(node.streaming_inputs), len(node.outputs)
            if n_in < in_lo or (in_hi is not None and n_in > in_hi):
                issues.append(f"node n{node.node_id} ({node.label()}): bad input arity {n_in}")
            if n_out < out_lo or (out_hi is not None and n_out > out_hi):
                issues.append(f"node n{node.node_id} ({node.label()}): bad output arity {n_out}")
            if (
                node.kind in (COMMAND, MAP)
                and node.input_slots is not None
                and len(node.input_slots) != n_in
            ):
                issues.append(f"node n{node.node_id}: input slots do not cover inputs")
        # partitions must be graph inputs over named files
        for edge in self.edges.values():
            if edge.partition is not None and (edge.producer is not None or not edge.path):
                issues.append(f"edge e{edge.edge_id}: partition must be a named graph input")
        # at most one stdin graph input
        stdins = [e for e in self.edges.values() if e.kind == STDIN and e.producer is None]
        if len(stdins) > 1:
            issues.append("multiple stdin inputs")
        # acyclicity
        if not issues:
            if len(self._kahn()) != len(self.nodes):
                issues.append("cycle")
        return issues

    # -- debug dump -------------------------------------------------------

    def to_json(self) -> str:
        def edge_obj(e: DfgEdge):
            obj = {
                "id": e.edge_id,
                "kind": e.kind,
                "producer": e.producer,
                "consumer": e.consumer,
            }
            if e.path is not None:
                obj["path"] = e.path
            if e.append:
                obj["append"] = True
            if e.partition is not None:
                obj["partition"] = list(e.partition)
            return obj

        def node_obj(n: DfgNode):
            obj = {
                "id": n.node_id,
                "kind": n.kind,
                "label": n.label(),
                "config_inputs": n.config_inputs,
                "streaming_inputs": n.streaming_inputs,
                "outputs": n.outputs,
            }
            if n.instance is not None:
                obj["argv"] = [n.instance.name] + n.instance.argv
            if n.agg is not None:
                obj["aggregate"] = [n.agg[0]] + n.agg[1]
            if n.kind == RELAY:
                obj["eager"] = n.eager
            return obj

        return json.dumps(
            {
                "provenance": self.provenance,
                "nodes": [node_obj(self.nodes[k]) for k in sorted(self.nodes)],
                "edges": [edge_obj(self.edges[k]) for k in sorted(self.edges)],
                "inputs": [e.edge_id for e in self.input_edges()],
                "outputs": [e.edge_id for e in self.output_edges()],
            },
            indent=2,
            sort_keys=True,
        )
