"""shpar: a source-to-source compiler that data-parallelizes shell pipelines."""

__version__ = "0.1.0"
