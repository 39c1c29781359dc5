"""Annotation loading, predicate evaluation, and command classification."""

from __future__ import annotations

import json
import re
from importlib import resources
from pathlib import Path

from .model import (
    AnnotationCase,
    AnnotationError,
    AnnotationRecord,
    Class,
    CommandInstance,
    IoSpec,
    Predicate,
    StreamRef,
)


def normalize_args(args: list[str], short_long: list[tuple[str, str]]) -> list[str]:
    """Rewrite long options to their short spellings (`--flag=v` -> `-f v`)."""
    by_long = {long: short for short, long in short_long}
    out: list[str] = []
    for arg in args:
        if arg.startswith("--"):
            name, eq, value = arg.partition("=")
            short = by_long.get(name)
            if short is not None:
                out.append(short)
                if eq:
                    out.append(value)
                continue
        out.append(arg)
    return out


def tokenize_args(args: list[str], value_flags: list[str] | tuple = ()):
    """Split an argument vector into flags and operands.

    Arguments beginning with `-` are flags until a literal `--`; `-` alone is
    an operand.  Flags listed in value_flags consume a value, either attached
    (`-d,`) or as the following argument.  Returns (flags, operands) where
    flags is a list of (name, value-or-None) and operands a list of
    (argv-index, text).
    """
    flags: list[tuple[str, str | None]] = []
    operands: list[tuple[int, str]] = []
    i = 0
    n = len(args)
    only_operands = False
    while i < n:
        arg = args[i]
        if only_operands or arg == "-" or not arg.startswith("-"):
            operands.append((i, arg))
            i += 1
            continue
        if arg == "--":
            only_operands = True
            i += 1
            continue
        if arg.startswith("--"):
            name, eq, value = arg.partition("=")
            flags.append((name, value if eq else None))
            i += 1
            continue
        # short flag cluster, possibly with an attached or following value
        j = 1
        consumed = False
        while j < len(arg):
            name = "-" + arg[j]
            if name in value_flags:
                attached = arg[j + 1:]
                if attached:
                    flags.append((name, attached))
                elif i + 1 < n:
                    flags.append((name, args[i + 1]))
                    i += 1
                else:
                    flags.append((name, None))
                consumed = True
                break
            flags.append((name, None))
            j += 1
        i += 1
        del consumed
    return flags, operands


def evaluate_predicate(
    p: Predicate,
    args: list[str],
    value_flags: list[str] | tuple = (),
) -> bool:
    """Total, deterministic predicate evaluation over an argument vector."""
    if p.op == "default":
        return True
    if p.op == "or":
        return any(evaluate_predicate(q, args, value_flags) for q in p.operands)
    if p.op == "and":
        return all(evaluate_predicate(q, args, value_flags) for q in p.operands)
    if p.op == "not":
        return not evaluate_predicate(p.operands[0], args, value_flags)
    flags, _ = tokenize_args(args, value_flags)
    if p.op == "exists":
        want = p.operands[0]
        return any(name == want for name, _ in flags)
    if p.op == "val_opt_eq":
        want, value = p.operands
        return any(name == want and val == value for name, val in flags)
    if p.op == "args_match":
        rx = re.compile(p.operands[0])
        return any(rx.search(a) for a in args)
    raise AnnotationError(f"unknown operator {p.op!r}")


def _parse_case(obj, where: str) -> AnnotationCase:
    try:
        predicate = Predicate.parse(obj["predicate"])
    except KeyError:
        raise AnnotationError(f"{where}: case missing 'predicate'")
    try:
        klass = Class(obj["class"])
    except KeyError:
        raise AnnotationError(f"{where}: case missing 'class'")
    except ValueError:
        raise AnnotationError(f"{where}: unknown class {obj['class']!r}")
    inputs = [IoSpec.parse(s) for s in obj.get("inputs", [])]
    outputs = [IoSpec.parse(s) for s in obj.get("outputs", [])]
    return AnnotationCase(
        predicate=predicate,
        klass=klass,
        inputs=inputs,
        outputs=outputs,
        config_flags=list(obj.get("config-inputs", [])),
        concat_inputs=obj.get("concat-inputs"),
    )


def parse_record(obj, where: str = "<memory>") -> AnnotationRecord:
    if "command" not in obj:
        raise AnnotationError(f"{where}: missing 'command' field")
    if "cases" not in obj or not isinstance(obj["cases"], list):
        raise AnnotationError(f"{where}: missing 'cases' list")
    name = obj["command"]
    cases = [_parse_case(c, f"{where}:{name}") for c in obj["cases"]]
    options = set(obj.get("options", []))
    unknown = options - {"stdin-hyphen", "empty-args-stdin"}
    if unknown:
        raise AnnotationError(f"{where}:{name}: unknown options {sorted(unknown)}")
    short_long = [(e["short"], e["long"]) for e in obj.get("short-long", [])]
    return AnnotationRecord(
        command=name,
        cases=cases,
        options=options,
        short_long=short_long,
        value_flags=list(obj.get("value-flags", [])),
    )


class AnnotationDb:
    """Validated annotation records keyed by command name."""

    def __init__(self, records: dict[str, AnnotationRecord] | None = None):
        self.records = records or {}

    def get(self, command: str) -> AnnotationRecord | None:
        return self.records.get(command)

    def classify(self, command: str, args: list[str]) -> CommandInstance:
        return classify(command, args, self)


def load_annotations(directory: str | Path) -> AnnotationDb:
    """Load every *.json annotation record under a directory."""
    records: dict[str, AnnotationRecord] = {}
    directory = Path(directory)
    for path in sorted(directory.glob("*.json")):
        try:
            obj = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise AnnotationError(f"{path.name}: invalid JSON: {exc}") from exc
        record = parse_record(obj, where=path.name)
        if record.command in records:
            raise AnnotationError(f"{path.name}: duplicate command {record.command!r}")
        records[record.command] = record
    return AnnotationDb(records)


_default_db: AnnotationDb | None = None


def default_db() -> AnnotationDb:
    """Database built from the annotation records shipped with the package."""
    global _default_db
    if _default_db is None:
        records: dict[str, AnnotationRecord] = {}
        data = resources.files(__package__) / "data"
        for entry in sorted(data.iterdir(), key=lambda e: e.name):
            if entry.name.endswith(".json"):
                record = parse_record(json.loads(entry.read_text()), where=entry.name)
                if record.command in records:
                    raise AnnotationError(f"duplicate command {record.command!r}")
                records[record.command] = record
        _default_db = AnnotationDb(records)
    return _default_db


_UNKNOWN = object()


def classify(command: str, args: list[str], db: AnnotationDb) -> CommandInstance:
    """Resolve a concrete invocation to class plus ordered inputs/outputs.

    Unknown commands conservatively classify as side-effectful with empty I/O.
    """
    hook = HOOKS.get(command)
    if hook is not None:
        return hook(command, args, db)
    record = db.get(command)
    if record is None:
        return CommandInstance(command, list(args), Class.SIDE_EFFECTFUL)
    norm = normalize_args(args, record.short_long)
    for case in record.cases:
        if evaluate_predicate(case.predicate, norm, record.value_flags):
            return _resolve_case(command, args, norm, record, case)
    return CommandInstance(command, list(args), Class.SIDE_EFFECTFUL)


def _resolve_case(
    command: str,
    args: list[str],
    norm: list[str],
    record: AnnotationRecord,
    case: AnnotationCase,
) -> CommandInstance:
    if not case.klass.in_dfg:
        return CommandInstance(command, list(args), case.klass)
    flags, _ = tokenize_args(norm, record.value_flags)
    # operand positions must refer to the caller's argv; recompute there
    _, operands = tokenize_args(args, _original_value_flags(record))

    def operand_streams(spec: IoSpec) -> list[StreamRef]:
        if spec.slice:
            chosen = operands[spec.start or 0: spec.stop]
        else:
            idx = spec.start or 0
            chosen = operands[idx: idx + 1]
        out = []
        for argv_index, text in chosen:
            if text == "-" and "stdin-hyphen" in record.options:
                out.append(StreamRef("stdin", arg_index=argv_index))
            else:
                out.append(StreamRef("file", path=text, arg_index=argv_index))
        return out

    inputs: list[StreamRef] = []
    for spec in case.inputs:
        if spec.kind == "stdin":
            inputs.append(StreamRef("stdin"))
        elif spec.kind == "args":
            inputs.extend(operand_streams(spec))
    if not inputs and "empty-args-stdin" in record.options:
        if any(spec.kind == "args" for spec in case.inputs):
            inputs = [StreamRef("stdin")]

    outputs: list[StreamRef] = []
    for spec in case.outputs:
        if spec.kind == "stdout":
            outputs.append(StreamRef("stdout"))
        elif spec.kind == "args":
            outputs.extend(
                StreamRef("file", path=t, arg_index=i)
                for i, t in _operand_slice(operands, spec)
            )
    if not outputs:
        outputs = [StreamRef("stdout")]

    config_paths = [val for name, val in flags
                    if name in case.config_flags and val is not None]
    concat = case.concat_inputs
    if concat is None:
        concat = case.klass is Class.STATELESS
    return CommandInstance(
        name=command,
        argv=list(args),
        klass=case.klass,
        inputs=inputs,
        outputs=outputs,
        concat_ok=concat,
        config_paths=config_paths,
    )


def _operand_slice(operands, spec: IoSpec):
    if spec.slice:
        return operands[spec.start or 0: spec.stop]
    idx = spec.start or 0
    return operands[idx: idx + 1]


def _original_value_flags(record: AnnotationRecord) -> list[str]:
    # long spellings of value flags also consume values in the raw argv
    longs = {short: long for short, long in record.short_long}
    out = list(record.value_flags)
    out += [longs[f] for f in record.value_flags if f in longs]
    return out


# -- classifier hooks --------------------------------------------------------
# Commands whose class depends on more than their own flags get a built-in
# hook instead of executing annotation-supplied code.

_XARGS_VALUE_FLAGS = ["-n", "-L", "-I", "-d", "-E", "-s", "-P", "-a"]


def _classify_xargs(command: str, args: list[str], db: AnnotationDb) -> CommandInstance:
    flags, operands = tokenize_args(args, _XARGS_VALUE_FLAGS)
    if any(name == "-a" for name, _ in flags):
        return CommandInstance(command, list(args), Class.SIDE_EFFECTFUL)
    if not operands:
        return CommandInstance(command, list(args), Class.SIDE_EFFECTFUL)
    first = operands[0][0]
    inner = classify(args[first], args[first + 1:], db)
    if inner.klass is Class.SIDE_EFFECTFUL:
        return CommandInstance(command, list(args), Class.SIDE_EFFECTFUL)
    one_per_line = any(name in ("-n", "-L") and val == "1" for name, val in flags)
    if inner.klass is Class.STATELESS and one_per_line:
        klass = Class.STATELESS
    else:
        klass = Class.PURE
    return CommandInstance(
        name=command,
        argv=list(args),
        klass=klass,
        inputs=[StreamRef("stdin")],
        outputs=[StreamRef("stdout")],
        concat_ok=klass is Class.STATELESS,
    )


HOOKS = {
    "xargs": _classify_xargs,
}
