"""Dispatcher so emitted scripts can run runtime tools without installed
entry points: `python -m shpar.runtime TOOL ARGS...`."""

import sys

from . import aggregate, eager, split

TOOLS = {
    "eager": eager.main,
    "split": split.main,
    "agg-wc": aggregate.main_wc,
    "agg-merge": aggregate.main_merge,
    "agg-uniq": aggregate.main_uniq,
    "agg-tac": aggregate.main_tac,
}


def main() -> int:
    if len(sys.argv) < 2 or sys.argv[1] not in TOOLS:
        print(f"usage: python -m shpar.runtime {{{','.join(TOOLS)}}} ...",
              file=sys.stderr)
        return 2
    return TOOLS[sys.argv[1]](sys.argv[2:]) or 0


if __name__ == "__main__":
    sys.exit(main())
