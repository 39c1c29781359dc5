"""Standalone runtime primitives invoked by emitted scripts.

Each submodule exposes a pure byte-level core (used by the reference
interpreter) and a CLI entry point (installed as shpar-eager, shpar-split,
shpar-agg-*).
"""
