"""Data model for per-command parallelizability annotations."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field


class AnnotationError(Exception):
    pass


class Class(enum.Enum):
    """Parallelizability class, ordered by difficulty of parallelization."""

    STATELESS = "stateless"
    PURE = "pure"
    N_PURE = "n-pure"
    SIDE_EFFECTFUL = "side-effectful"

    @property
    def rank(self) -> int:
        return _RANK[self]

    def __lt__(self, other: "Class") -> bool:
        return self.rank < other.rank

    @property
    def in_dfg(self) -> bool:
        """Classes whose commands interact with the world only via streams."""
        return self is not Class.SIDE_EFFECTFUL


_RANK = {Class.STATELESS: 0, Class.PURE: 1, Class.N_PURE: 2, Class.SIDE_EFFECTFUL: 3}

OPERATORS = ("exists", "val_opt_eq", "or", "and", "not", "args_match", "default")


@dataclass(frozen=True)
class Predicate:
    op: str
    operands: tuple = ()

    @staticmethod
    def parse(obj) -> "Predicate":
        if obj == "default":
            return Predicate("default")
        if not isinstance(obj, dict) or "operator" not in obj:
            raise AnnotationError(f"malformed predicate: {obj!r}")
        op = obj["operator"]
        if op not in OPERATORS:
            raise AnnotationError(f"unknown predicate operator {op!r}")
        raw = obj.get("operands", [])
        if op in ("or", "and", "not"):
            operands = tuple(Predicate.parse(o) for o in raw)
            if op == "not" and len(operands) != 1:
                raise AnnotationError("'not' takes exactly one operand")
            if not operands:
                raise AnnotationError(f"{op!r} needs at least one operand")
        else:
            operands = tuple(raw)
            if op == "exists" and len(operands) != 1:
                raise AnnotationError("'exists' takes exactly one flag operand")
            if op == "val_opt_eq" and len(operands) != 2:
                raise AnnotationError("'val_opt_eq' takes flag and value operands")
            if op == "args_match":
                if len(operands) != 1:
                    raise AnnotationError("'args_match' takes one regex operand")
                try:
                    re.compile(operands[0])
                except re.error as exc:
                    raise AnnotationError(f"bad args_match regex: {exc}") from exc
        return Predicate(op, operands)


_SPEC_RE = re.compile(r"^args\[(?:(\d*)(:)?(\d*))?\]$")


@dataclass(frozen=True)
class IoSpec:
    """One inputs/outputs entry: stdin, stdout, or an operand slice."""

    kind: str  # 'stdin' | 'stdout' | 'args'
    start: int | None = None
    stop: int | None = None
    slice: bool = False

    @staticmethod
    def parse(text: str) -> "IoSpec":
        if text == "stdin":
            return IoSpec("stdin")
        if text == "stdout":
            return IoSpec("stdout")
        m = _SPEC_RE.match(text)
        if not m:
            raise AnnotationError(f"bad I/O spec {text!r}")
        start, colon, stop = m.groups()
        if colon is None and start == "":
            raise AnnotationError(f"bad I/O spec {text!r}")
        return IoSpec(
            "args",
            start=int(start) if start else None,
            stop=int(stop) if stop else None,
            slice=colon is not None,
        )


@dataclass
class AnnotationCase:
    predicate: Predicate
    klass: Class
    inputs: list[IoSpec] = field(default_factory=list)
    outputs: list[IoSpec] = field(default_factory=list)
    # extensions beyond the published schema (documented in README):
    config_flags: list[str] = field(default_factory=list)  # flags whose value is a config file
    concat_inputs: bool | None = None  # node(f1..fn) == node(cat f1..fn)?


@dataclass
class AnnotationRecord:
    command: str
    cases: list[AnnotationCase]
    options: set[str] = field(default_factory=set)
    short_long: list[tuple[str, str]] = field(default_factory=list)
    value_flags: list[str] = field(default_factory=list)  # flags that consume a value

    def __post_init__(self):
        defaults = [i for i, c in enumerate(self.cases) if c.predicate.op == "default"]
        if len(defaults) > 1:
            raise AnnotationError(f"{self.command}: multiple default cases")
        if defaults and defaults[0] != len(self.cases) - 1:
            raise AnnotationError(f"{self.command}: default case must be last")


# Stream references resolved for a concrete invocation -----------------------

STDIN = ("stdin",)
STDOUT = ("stdout",)


@dataclass(frozen=True)
class StreamRef:
    kind: str  # 'stdin' | 'stdout' | 'file'
    path: str | None = None
    arg_index: int | None = None  # position in argv, for rewiring

    def __repr__(self):
        if self.kind == "file":
            return f"StreamRef(file:{self.path})"
        return f"StreamRef({self.kind})"


@dataclass
class CommandInstance:
    """A concrete invocation resolved to class plus ordered inputs/outputs."""

    name: str
    argv: list[str]
    klass: Class
    inputs: list[StreamRef] = field(default_factory=list)
    outputs: list[StreamRef] = field(default_factory=list)
    concat_ok: bool = False
    config_paths: list[str] = field(default_factory=list)

    def argv_without_input_operands(self) -> list[str]:
        """Argument vector with input-file operands removed, for running the
        command against a single restructured stdin stream."""
        drop = {r.arg_index for r in self.inputs if r.arg_index is not None}
        return [a for i, a in enumerate(self.argv) if i not in drop]
