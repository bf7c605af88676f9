"""DAG-exchangeable random arrays.

Index machinery (DAGs, closed sets, multi-indices), hierarchical automorphisms,
keyed randomness, representation samplers, the infinite relational model and
statistical checks.
"""
from .dag import Dag, DagError, load_dag, load_fixture, parse_dag
from .indices import MultiIndex, MultiIndexError, Window, parse_window
from .randomness import PRF_ID, SeededSource

__version__ = "0.1.0"

__all__ = [
    "Dag",
    "DagError",
    "MultiIndex",
    "MultiIndexError",
    "PRF_ID",
    "SeededSource",
    "Window",
    "load_dag",
    "load_fixture",
    "parse_dag",
    "parse_window",
    "__version__",
]
