"""Python front end of the absflow engine.

Every call runs to completion in C++ and returns plain dicts and lists.
"""

from ._absflow import (
    DecodeError,
    Deadlock,
    FormatError,
    GraphError,
    TaskFailure,
    bench,
    criterion_names,
    load_snapshot,
    oracle,
    run,
    topology_json,
    topology_names,
    verify,
)

__all__ = [
    "DecodeError",
    "Deadlock",
    "FormatError",
    "GraphError",
    "TaskFailure",
    "bench",
    "criterion_names",
    "load_snapshot",
    "oracle",
    "run",
    "topology_json",
    "topology_names",
    "verify",
]
