"""Registry mapping parallelizable-pure command instances to their map and
aggregate programs.

The map program defaults to the command itself; the aggregate side is one of
the runtime aggregators.  A pure command with no registered pair is treated
as non-parallelizable by the transformation engine.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .annotations.db import tokenize_args
from .annotations.model import Class, CommandInstance

_SAFE_KEY = re.compile(r"^\d+(,\d+)?[bn]*$")
_SORT_VALUE_FLAGS = ["-k", "-t", "-o", "-S", "-T"]
_WC_FLAGS = set("lwcm")


@dataclass
class AggregatorPair:
    map_argv: list[str]  # full argv including program name
    agg_program: str  # runtime aggregator name, e.g. "agg-merge"
    agg_flags: list[str] = field(default_factory=list)


def _sort_flags(instance: CommandInstance) -> list[str] | None:
    """Flag vector for the merge aggregator, or None when some flag falls
    outside the comparisons the merge implementation reproduces."""
    args = instance.argv_without_input_operands()
    flags, operands = tokenize_args(args, _SORT_VALUE_FLAGS)
    if operands:
        return None
    for name, value in flags:
        letter = name.lstrip("-")
        if letter in ("n", "r", "s", "b"):
            continue
        if name == "-t":
            if value is None or len(value) != 1:
                return None
        elif name == "-k":
            if value is None or not _SAFE_KEY.match(value):
                return None
        else:
            return None
    return args


def aggregator_for(instance: CommandInstance) -> AggregatorPair | None:
    """Map/aggregate pair for a parallelizable-pure instance, or None."""
    if instance.klass is not Class.PURE:
        return None
    name = instance.name
    map_argv = [name] + instance.argv_without_input_operands()
    if name == "wc":
        flags, operands = tokenize_args(instance.argv_without_input_operands())
        if operands or any(set(f.lstrip("-")) - _WC_FLAGS for f, _ in flags):
            return None
        return AggregatorPair(map_argv, "agg-wc")
    if name == "sort":
        flags = _sort_flags(instance)
        if flags is None:
            return None
        return AggregatorPair(map_argv, "agg-merge", flags)
    if name == "uniq":
        rest = instance.argv_without_input_operands()
        if rest == []:
            return AggregatorPair(map_argv, "agg-uniq")
        if rest == ["-c"] or rest == ["--count"]:
            return AggregatorPair([name, "-c"], "agg-uniq", ["-c"])
        return None
    if name == "tac":
        if instance.argv_without_input_operands() == []:
            return AggregatorPair(map_argv, "agg-tac")
        return None
    return None
