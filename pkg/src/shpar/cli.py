"""Compiler driver CLI: compile a script, then execute or print the result."""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import tempfile
import time

from . import __version__
from .compiler import CompileOptions, compile_script
from .parser import ShellParseError, parse_script
from .shast import unparse


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shpar",
        description="Compile a POSIX shell script into a data-parallel one "
                    "and (by default) execute it on the fly.",
    )
    parser.add_argument("input", nargs="?",
                        help="The script to be compiled and executed.")
    parser.add_argument("--preprocess_only", action="store_true",
                        help="Pre-process (not execute) input script.")
    parser.add_argument("--output_preprocessed", action="store_true",
                        help="Output the preprocessed script.")
    parser.add_argument("-c", "--command", metavar="COMMAND",
                        help="Evaluate the following COMMAND as a script, "
                             "rather than a file.")
    parser.add_argument("-w", "--width", type=int, metavar="WIDTH",
                        help="Set degree of data-parallelism.")
    parser.add_argument("--no_optimize", action="store_true",
                        help="Not apply transformations over the DFG.")
    parser.add_argument("--dry_run_compiler", action="store_true",
                        help="Not execute the compiled script, even if the "
                             "compiler succeeded.")
    parser.add_argument("--assert_compiler_success", action="store_true",
                        help="Assert that the compiler succeeded (used to "
                             "make tests more robust).")
    parser.add_argument("-t", "--output_time", action="store_true",
                        help="Output the time it took for every step.")
    parser.add_argument("-p", "--output_optimized", action="store_true",
                        help="Output the parallel script for inspection.")
    parser.add_argument("-d", "--debug", type=int, default=0, metavar="DEBUG",
                        help="Configure debug level; defaults to 0.")
    parser.add_argument("--log_file", metavar="LOG_FILE",
                        help="Location of log file; defaults to stderr.")
    parser.add_argument("--no_eager", action="store_true",
                        help="Disable eager nodes before merging nodes.")
    parser.add_argument("--termination",
                        choices=["clean_up_graph", "drain_stream"],
                        default="clean_up_graph",
                        help="Determine the termination behavior of the DFG.")
    parser.add_argument("--config_path", metavar="CONFIG_PATH",
                        help="Determine the config file path.")
    parser.add_argument("-v", "--version", action="version",
                        version=f"%(prog)s {__version__}")
    return parser


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path) as handle:
        config = json.load(handle)
    if not isinstance(config, dict):
        raise SystemExit(f"shpar: {path}: config must be a JSON object")
    return config


class _Log:
    def __init__(self, path: str | None, level: int):
        self.handle = open(path, "a") if path else sys.stderr
        self.level = level

    def emit(self, level: int, message: str):
        if self.level >= level:
            print(message, file=self.handle)
            self.handle.flush()


def main(argv: list[str] | None = None) -> int:
    args = build_arg_parser().parse_args(argv)
    log = _Log(args.log_file, args.debug)

    if (args.input is None) == (args.command is None):
        print("shpar: provide exactly one of an input script or -c COMMAND",
              file=sys.stderr)
        return 2

    if args.command is not None:
        source = args.command
        name = "<command>"
    else:
        try:
            with open(args.input, encoding="utf-8") as handle:
                source = handle.read()
        except OSError as exc:
            print(f"shpar: {exc}", file=sys.stderr)
            return 2
        name = args.input

    config = _load_config(args.config_path)
    options = CompileOptions(
        width=args.width if args.width is not None
        else config.get("default_width"),
        no_optimize=args.no_optimize,
        no_eager=args.no_eager,
        termination=args.termination,
        runtime_mode=config.get("runtime_mode", "auto"),
        annotation_dirs=(
            [config["annotations_dir"]] if config.get("annotations_dir") else []
        ),
    )

    if args.preprocess_only:
        try:
            ast = parse_script(source)
        except ShellParseError as exc:
            print(f"shpar: {name}: {exc}", file=sys.stderr)
            return 2
        if args.output_preprocessed:
            print(unparse(ast))
        return 0

    t0 = time.perf_counter()
    try:
        result = compile_script(source, options)
    except ShellParseError as exc:
        print(f"shpar: {name}: {exc}", file=sys.stderr)
        return 2
    compile_time = time.perf_counter() - t0

    log.emit(1, f"shpar: width {result.width}; "
                f"{len(result.analysis.regions)} region(s), "
                f"{sum(1 for r in result.regions if r.fragment)} parallelized, "
                f"{len(result.demotions)} demotion(s)")
    for demotion in result.demotions:
        log.emit(1, f"shpar: demoted {demotion.where}: {demotion.reason}")
    for compiled in result.regions:
        if compiled.report is not None:
            log.emit(1, compiled.report.summary())
        if compiled.expanded is not None:
            log.emit(2, compiled.expanded.to_json())
    log.emit(3, f"--- emitted script ---\n{result.script}\n---")

    if args.assert_compiler_success and result.demotions:
        for demotion in result.demotions:
            print(f"shpar: demoted {demotion.where}: {demotion.reason}",
                  file=sys.stderr)
        print("shpar: compilation had demoted regions "
              "(--assert_compiler_success)", file=sys.stderr)
        return 3

    if args.output_optimized:
        print(result.script)

    if args.output_time:
        for phase, seconds in result.timings.items():
            print(f"shpar: time {phase}: {seconds * 1000:.1f} ms", file=sys.stderr)
        print(f"shpar: time compile-total: {compile_time * 1000:.1f} ms",
              file=sys.stderr)

    if args.dry_run_compiler:
        return 0

    sys.stdout.flush()
    sys.stderr.flush()
    t0 = time.perf_counter()
    status = run_script(result.script)
    if args.output_time:
        print(f"shpar: time execute: {(time.perf_counter() - t0) * 1000:.1f} ms",
              file=sys.stderr)
    return status


def run_script(script: str) -> int:
    """Run an emitted script under bash, forwarding stdio and exit status."""
    with tempfile.NamedTemporaryFile(
        "w", suffix=".sh", prefix="shpar-run-", delete=False
    ) as handle:
        handle.write(script)
        path = handle.name
    try:
        proc = subprocess.run(["bash", path])
        return proc.returncode
    finally:
        os.unlink(path)


if __name__ == "__main__":
    sys.exit(main())
