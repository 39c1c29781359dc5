"""Compilation driver: parse, find regions, build and expand graphs, emit."""

from __future__ import annotations

import os
import time
from collections import Counter
from dataclasses import dataclass, field

from . import dfg as d
from .annotations.db import AnnotationDb, default_db, load_annotations
from .emit import CompiledFragment, EmitOptions, emit_program, emit_script
from .parallelize import ExpandOptions, TransformReport, default_width, expand
from .parser import parse_script
from .regions import (
    DataflowRegion,
    Demotion,
    RegionAnalysis,
    find_dataflow_regions,
    region_to_dfg,
)
from .shast import Sequence, unparse


@dataclass
class CompileOptions:
    width: int | None = None  # None = auto from CPU count
    no_optimize: bool = False
    no_eager: bool = False
    termination: str = "clean_up_graph"
    runtime_mode: str = "auto"
    annotation_dirs: list[str] = field(default_factory=list)

    def effective_width(self) -> int:
        if self.width is not None:
            return max(1, self.width)
        return default_width(os.cpu_count() or 1)


@dataclass
class CompiledRegion:
    region: DataflowRegion
    base: d.Dfg | None
    expanded: d.Dfg | None
    report: TransformReport | None
    fragment: str | None
    demoted: str | None = None


@dataclass
class CompileResult:
    source: str
    ast: Sequence
    analysis: RegionAnalysis
    regions: list[CompiledRegion]
    demotions: list[Demotion]
    script: str
    width: int
    timings: dict[str, float] = field(default_factory=dict)

    def census(self) -> Counter:
        total: Counter = Counter()
        for compiled in self.regions:
            if compiled.expanded is not None and compiled.fragment is not None:
                total.update(compiled.expanded.census())
        return total

    def class_structure(self) -> Counter:
        """Multiset of parallelizability classes over region commands.

        Plain `cat` is concatenation plumbing (a Cat node, not a command
        stage) and is not counted."""
        out: Counter = Counter()
        for compiled in self.regions:
            for part in compiled.region.parts:
                for rc in part.commands:
                    inst = rc.instance
                    if inst is None:
                        continue
                    if inst.name == "cat" and inst.klass.value == "stateless":
                        continue
                    out[inst.klass.value] += 1
        return out

    @property
    def ok(self) -> bool:
        return not self.demotions


def _did_parallelize(g: d.Dfg) -> bool:
    introduced = {"stateless-copy", "map", "aggregate", "t1", "t2-cat",
                  "t2-split", "regroup"}
    if any(n.origin[0] in introduced for n in g.nodes.values()):
        return True
    return any(e.partition is not None for e in g.edges.values())


def _status_source(g: d.Dfg) -> int | None:
    """Node whose exit status stands for the region's (the producer of the
    stdout edge, or of the last output edge)."""
    outputs = g.output_edges()
    if not outputs:
        return None
    stdout_edges = [e for e in outputs if e.kind == d.STDOUT]
    chosen = stdout_edges[-1] if stdout_edges else outputs[-1]
    return chosen.producer


def build_db(options: CompileOptions) -> AnnotationDb:
    db = default_db()
    if options.annotation_dirs:
        records = dict(db.records)
        for directory in options.annotation_dirs:
            extra = load_annotations(directory)
            records.update(extra.records)
        db = AnnotationDb(records)
    return db


def compile_script(source: str, options: CompileOptions | None = None,
                   db: AnnotationDb | None = None) -> CompileResult:
    options = options or CompileOptions()
    db = db or build_db(options)
    width = options.effective_width()
    timings: dict[str, float] = {}

    t0 = time.perf_counter()
    ast = parse_script(source)
    timings["parse"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    analysis = find_dataflow_regions(ast, db)
    timings["regions"] = time.perf_counter() - t0
    demotions = list(analysis.demotions)

    compiled: list[CompiledRegion] = []
    t0 = time.perf_counter()
    emit_opts = EmitOptions(termination=options.termination,
                            runtime_mode=options.runtime_mode)
    for region in analysis.regions:
        if options.no_optimize:
            compiled.append(CompiledRegion(region, None, None, None, None))
            continue
        base, reason = region_to_dfg(region, db)
        if base is None:
            demotions.append(Demotion(f"region {region.region_id}", reason))
            compiled.append(
                CompiledRegion(region, None, None, None, None, demoted=reason)
            )
            continue
        expanded, report = expand(
            base, width, ExpandOptions(no_eager=options.no_eager)
        )
        fragment = None
        if _did_parallelize(expanded):
            fragment = emit_script(
                expanded, emit_opts,
                status_source=_status_source(base),
                label=f"region {region.region_id} width {width}",
            )
        compiled.append(CompiledRegion(region, base, expanded, report, fragment))
    timings["transform"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    fragments = [CompiledFragment(c.region, c.fragment)
                 for c in compiled if c.fragment is not None]
    if fragments:
        script = emit_program(ast, fragments)
    else:
        script = unparse(ast)
    timings["emit"] = time.perf_counter() - t0

    return CompileResult(
        source=source,
        ast=ast,
        analysis=analysis,
        regions=compiled,
        demotions=demotions,
        script=script,
        width=width,
        timings=timings,
    )
