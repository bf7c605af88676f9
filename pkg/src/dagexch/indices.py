"""Multi-indices: finite maps from a vertex subset to the positive naturals."""
from __future__ import annotations

import itertools
import struct
from typing import Iterable, Iterator, Mapping

from .dag import Dag, DagError

MAX_VALUE = 2**32 - 1


class MultiIndexError(ValueError):
    """Malformed multi-index operation (bad domain, value out of range, ...)."""


class MultiIndex:
    """An assignment ``vertex -> positive int`` on a subset of a DAG's vertices.

    The domain need not be closed.  Equality and hashing look only at the
    (domain, assignment) pairs, never at the dag object itself.
    """

    __slots__ = ("dag", "items", "_hash")

    def __init__(self, dag: Dag, assignment: Mapping[str, int] | Iterable[tuple[str, int]] = ()):
        pairs = dict(assignment)
        for v, n in pairs.items():
            if v not in dag:
                raise MultiIndexError(f"unknown vertex {v!r}")
            if isinstance(n, bool) or not isinstance(n, int) or n < 1:
                raise MultiIndexError(f"index values are positive integers, got {v}={n!r}")
        self.dag = dag
        self.items: tuple[tuple[str, int], ...] = tuple(
            sorted(pairs.items(), key=lambda kv: dag.ordinal[kv[0]])
        )
        self._hash = hash(self.items)

    @property
    def domain(self) -> frozenset[str]:
        return frozenset(v for v, _ in self.items)

    def __getitem__(self, v: str) -> int:
        for w, n in self.items:
            if w == v:
                return n
        raise KeyError(v)

    def get(self, v: str, default=None):
        for w, n in self.items:
            if w == v:
                return n
        return default

    def as_dict(self) -> dict[str, int]:
        return dict(self.items)

    def __len__(self) -> int:
        return len(self.items)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MultiIndex):
            return NotImplemented
        return self.items == other.items

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        body = ",".join(f"{v}={n}" for v, n in self.items)
        return f"({body})"


def empty_index(dag: Dag) -> MultiIndex:
    return MultiIndex(dag)


def restrict(a: MultiIndex, vs: Iterable[str]) -> MultiIndex:
    vs = frozenset(vs)
    if not vs <= a.domain:
        missing = sorted(vs - a.domain)
        raise MultiIndexError(f"cannot restrict to {missing}: not in the index domain")
    return MultiIndex(a.dag, [(v, n) for v, n in a.items if v in vs])


def rstr(a: MultiIndex) -> tuple[MultiIndex, ...]:
    """Restrictions of ``a`` to every closed subset of its (closed) domain."""
    dom = a.domain
    if not a.dag.is_closed(dom):
        raise MultiIndexError(f"rstr needs a closed domain, got {sorted(dom)}")
    return tuple(restrict(a, c) for c in a.dag.closed_subsets(dom))


def srstr(a: MultiIndex) -> tuple[MultiIndex, ...]:
    return tuple(b for b in rstr(a) if b != a)


def meet(a: MultiIndex, b: MultiIndex) -> MultiIndex:
    """Restriction of ``a`` to the vertices where ``a`` and ``b`` agree."""
    if a.dag != b.dag:
        raise MultiIndexError("meet of indices over different DAGs")
    other = b.as_dict()
    return MultiIndex(a.dag, [(v, n) for v, n in a.items if other.get(v) == n])


def union(a: MultiIndex, b: MultiIndex) -> MultiIndex:
    """Join of two indices that agree on their common vertices."""
    merged = a.as_dict()
    for v, n in b.items:
        if merged.setdefault(v, n) != n:
            raise MultiIndexError(f"indices disagree at {v!r}")
    return MultiIndex(a.dag, merged)


class Window(Mapping[str, int]):
    """Per-vertex upper bounds ``k_v >= 1`` describing a finite box of indices."""

    def __init__(self, bounds: Mapping[str, int]):
        for v, k in bounds.items():
            if isinstance(k, bool) or not isinstance(k, int) or k < 1:
                raise MultiIndexError(f"window bound for {v!r} must be a positive integer, got {k!r}")
        self._bounds = dict(bounds)

    @classmethod
    def uniform(cls, dag: Dag, k: int) -> "Window":
        return cls({v: k for v in dag.vertices})

    def __getitem__(self, v: str) -> int:
        return self._bounds[v]

    def __iter__(self) -> Iterator[str]:
        return iter(self._bounds)

    def __len__(self) -> int:
        return len(self._bounds)

    def __repr__(self) -> str:
        return f"Window({self._bounds})"

    def contains(self, a: MultiIndex) -> bool:
        return all(v in self._bounds and n <= self._bounds[v] for v, n in a.items)


def parse_window(text: str, dag: Dag) -> Window:
    """Parse ``"v1=4,v2=3"``; ``"*=K"`` sets every vertex not named explicitly."""
    bounds: dict[str, int] = {}
    default = None
    for part in filter(None, (p.strip() for p in text.split(","))):
        name, sep, value = part.partition("=")
        if not sep:
            raise MultiIndexError(f"bad window entry {part!r}; expected name=K")
        try:
            k = int(value)
        except ValueError:
            raise MultiIndexError(f"bad window bound {value!r}") from None
        if name == "*":
            default = k
        elif name in dag:
            bounds[name] = k
        else:
            raise MultiIndexError(f"unknown vertex {name!r} in window")
    if default is not None:
        for v in dag.vertices:
            bounds.setdefault(v, default)
    return Window(bounds)


def enumerate_window(d: Dag, c: Iterable[str], w: Mapping[str, int]) -> list[MultiIndex]:
    """All indices on closed ``c`` inside ``w``, lexicographic in canonical vertex order."""
    c = d.check_vertices(c)
    if not d.is_closed(c):
        raise DagError(f"{sorted(c)} is not closed")
    verts = d.sort(c)
    missing = [v for v in verts if v not in w]
    if missing:
        raise MultiIndexError(f"window has no bound for {missing[0]!r}")
    ranges = [range(1, w[v] + 1) for v in verts]
    return [MultiIndex(d, zip(verts, vals)) for vals in itertools.product(*ranges)]


def encoding_words(a: MultiIndex) -> tuple[int, ...]:
    """``canonical_encoding`` as 32-bit words: count, then (ordinal, value) pairs."""
    words = [len(a.items)]
    for v, n in a.items:
        if n > MAX_VALUE:
            raise MultiIndexError(f"value {n} at {v!r} exceeds 2**32 - 1")
        words += [a.dag.ordinal[v], n]
    return tuple(words)


def canonical_encoding(a: MultiIndex) -> bytes:
    words = encoding_words(a)
    return struct.pack(f">{len(words)}I", *words)


def index_to_json(a: MultiIndex) -> dict:
    """``{"domain": [...], "values": {vertex: value}}``, canonical order throughout."""
    return {"domain": [v for v, _ in a.items], "values": dict(a.items)}


def index_from_json(d: Dag, obj) -> MultiIndex:
    """Inverse of :func:`index_to_json`; a bare ``{vertex: value}`` object is accepted too."""
    if not isinstance(obj, Mapping):
        raise MultiIndexError(f"multi-index must be a JSON object, got {obj!r}")
    if set(obj) == {"domain", "values"} and isinstance(obj["values"], Mapping):
        a = MultiIndex(d, obj["values"])
        if set(obj["domain"]) != a.domain:
            raise MultiIndexError(f"domain {obj['domain']} does not match values {dict(obj['values'])}")
        return a
    return MultiIndex(d, obj)
