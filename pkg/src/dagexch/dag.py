"""Finite DAGs, their reachability order and the lattice of downward-closed sets.

A vertex ``w`` precedes ``v`` (``w <= v``) when there is a directed path, possibly
of length zero, from ``w`` to ``v``.  A vertex set is *closed* when it contains
every predecessor of each of its members.  Closed sets are plain ``frozenset``
objects; anything that needs them in a fixed order goes through :meth:`Dag.sort`.
"""
from __future__ import annotations

import heapq
import random
import re
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Sequence

ClosedSet = frozenset

NAME_RE = re.compile(r"^[A-Za-z0-9_]+$")
DEFAULT_LATTICE_CAP = 20


class DagError(ValueError):
    """Invalid DAG description. ``line`` is the 1-based source line when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class Dag:
    """Immutable finite DAG.

    ``vertices`` keeps declaration order; ``order`` is the canonical
    topological order (Kahn's algorithm, ties broken by vertex name) and is what
    every deterministic encoding in the package is keyed on.
    """

    def __init__(
        self,
        vertices: Iterable[str],
        edges: Iterable[tuple[str, str]] = (),
        lattice_cap: int = DEFAULT_LATTICE_CAP,
    ):
        vertices = tuple(vertices)
        seen = set()
        for v in vertices:
            if not isinstance(v, str) or not NAME_RE.match(v):
                raise DagError(f"invalid vertex name {v!r}")
            if v in seen:
                raise DagError(f"duplicate vertex {v!r}")
            seen.add(v)
        edge_list = []
        edge_set = set()
        for src, dst in edges:
            for x in (src, dst):
                if x not in seen:
                    raise DagError(f"unknown vertex {x!r} in edge {src} -> {dst}")
            if src == dst:
                raise DagError(f"self-loop on {src!r}")
            if (src, dst) in edge_set:
                raise DagError(f"duplicate edge {src} -> {dst}")
            edge_set.add((src, dst))
            edge_list.append((src, dst))

        self.vertices: tuple[str, ...] = vertices
        self.edges: frozenset[tuple[str, str]] = frozenset(edge_set)
        self.lattice_cap = lattice_cap
        self.parents: dict[str, frozenset[str]] = {
            v: frozenset(s for s, d in edge_list if d == v) for v in vertices
        }
        self.children: dict[str, frozenset[str]] = {
            v: frozenset(d for s, d in edge_list if s == v) for v in vertices
        }
        self.order: tuple[str, ...] = self._topological_order()
        self.ordinal: dict[str, int] = {v: i for i, v in enumerate(self.order)}
        self.position: dict[str, int] = {v: i for i, v in enumerate(vertices)}
        down: dict[str, frozenset[str]] = {}
        for v in self.order:
            acc = {v}
            for p in self.parents[v]:
                acc |= down[p]
            down[v] = frozenset(acc)
        self._down = down

    def _topological_order(self) -> tuple[str, ...]:
        indeg = {v: len(self.parents[v]) for v in self.vertices}
        heap = [v for v, k in indeg.items() if k == 0]
        heapq.heapify(heap)
        out = []
        while heap:
            v = heapq.heappop(heap)
            out.append(v)
            for w in self.children[v]:
                indeg[w] -= 1
                if indeg[w] == 0:
                    heapq.heappush(heap, w)
        if len(out) != len(self.vertices):
            raise DagError("cycle detected")
        return tuple(out)

    # -- basic structure -------------------------------------------------

    def __len__(self) -> int:
        return len(self.vertices)

    def __contains__(self, v: object) -> bool:
        return v in self.ordinal

    def __iter__(self) -> Iterator[str]:
        return iter(self.order)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dag):
            return NotImplemented
        return set(self.vertices) == set(other.vertices) and self.edges == other.edges

    def __hash__(self) -> int:
        return hash((frozenset(self.vertices), self.edges))

    def __repr__(self) -> str:
        edges = ", ".join(f"{s}->{d}" for s, d in sorted(self.edges))
        return f"Dag({list(self.order)}, [{edges}])"

    @property
    def full(self) -> frozenset[str]:
        return frozenset(self.vertices)

    def check_vertices(self, vs: Iterable[str]) -> frozenset[str]:
        vs = frozenset(vs)
        unknown = vs - self.full
        if unknown:
            raise DagError(f"unknown vertex {sorted(unknown)[0]!r}")
        return vs

    def sort(self, vs: Iterable[str]) -> tuple[str, ...]:
        """Vertices of ``vs`` in canonical order."""
        return tuple(sorted(vs, key=self.ordinal.__getitem__))

    def set_key(self, vs: Iterable[str]) -> tuple[int, tuple[int, ...]]:
        """Sort key for vertex sets: by size, then lexicographically by
        declaration position."""
        ords = tuple(sorted(self.position[v] for v in vs))
        return (len(ords), ords)

    def precedes(self, w: str, v: str) -> bool:
        """``w <= v``: a possibly empty path runs from ``w`` to ``v``."""
        return w in self._down[v]

    def comparable(self, v: str, w: str) -> bool:
        return self.precedes(v, w) or self.precedes(w, v)

    # -- closed sets -----------------------------------------------------

    def downset(self, v: str) -> ClosedSet:
        if v not in self.ordinal:
            raise DagError(f"unknown vertex {v!r}")
        return self._down[v]

    def ancestors(self, v: str) -> ClosedSet:
        """Strict predecessors of ``v``; always a closed set."""
        return self.downset(v) - {v}

    def is_closed(self, vs: Iterable[str]) -> bool:
        vs = self.check_vertices(vs)
        return all(self.parents[v] <= vs for v in vs)

    def closure(self, vs: Iterable[str]) -> ClosedSet:
        out: set[str] = set()
        for v in self.check_vertices(vs):
            out |= self._down[v]
        return frozenset(out)

    def interior(self, vs: Iterable[str]) -> ClosedSet:
        vs = self.check_vertices(vs)
        return frozenset(v for v in vs if self._down[v] <= vs)

    def maximal(self, vs: Iterable[str]) -> frozenset[str]:
        vs = self.check_vertices(vs)
        return frozenset(v for v in vs if not any(w != v and self.precedes(v, w) for w in vs))

    def terminal_vertices(self) -> frozenset[str]:
        return frozenset(v for v in self.vertices if not self.children[v])

    def topological_enumeration(self) -> tuple[str, ...]:
        return self.order

    @cached_property
    def closed_sets(self) -> tuple[ClosedSet, ...]:
        """All closed sets, ordered by size then by declaration position."""
        if len(self) > self.lattice_cap:
            raise DagError(
                f"{len(self)} vertices exceeds the closed-set lattice cap of {self.lattice_cap}"
            )
        found: list[ClosedSet] = []
        order = self.order

        def walk(i: int, chosen: frozenset[str]) -> None:
            if i == len(order):
                found.append(chosen)
                return
            v = order[i]
            walk(i + 1, chosen)
            if self.parents[v] <= chosen:
                walk(i + 1, chosen | {v})

        walk(0, frozenset())
        found.sort(key=self.set_key)
        return tuple(found)

    def closed_subsets(self, c: Iterable[str]) -> tuple[ClosedSet, ...]:
        """Closed subsets of the closed set ``c``, in lattice order."""
        c = frozenset(c)
        return tuple(d for d in self.closed_sets if d <= c)

    def antichains(self) -> tuple[frozenset[str], ...]:
        """All sets of pairwise incomparable vertices, including the empty one."""
        found: list[frozenset[str]] = []
        order = self.order

        def walk(i: int, chosen: tuple[str, ...]) -> None:
            if i == len(order):
                found.append(frozenset(chosen))
                return
            walk(i + 1, chosen)
            v = order[i]
            if not any(self.comparable(v, w) for w in chosen):
                walk(i + 1, chosen + (v,))

        walk(0, ())
        found.sort(key=self.set_key)
        return tuple(found)

    # -- text format -----------------------------------------------------

    def serialize(self) -> str:
        lines = [f"v {v}" for v in sorted(self.vertices)]
        lines += [f"e {s} {d}" for s, d in sorted(self.edges)]
        return "\n".join(lines) + "\n"


def parse_dag(text: str, lattice_cap: int = DEFAULT_LATTICE_CAP) -> Dag:
    """Parse the line-based DAG format (``v <name>`` / ``e <src> <dst>`` / ``# ...``)."""
    vertices: list[str] = []
    known: dict[str, int] = {}
    edges: list[tuple[str, str]] = []
    succ: dict[str, set[str]] = {}

    def reaches(a: str, b: str) -> bool:
        stack, seen = [a], {a}
        while stack:
            x = stack.pop()
            if x == b:
                return True
            for y in succ.get(x, ()):
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        return False

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "v" and len(parts) == 2:
            name = parts[1]
            if not NAME_RE.match(name):
                raise DagError(f"invalid vertex name {name!r}", lineno)
            if name in known:
                raise DagError(f"duplicate vertex {name!r} (first declared on line {known[name]})", lineno)
            known[name] = lineno
            vertices.append(name)
        elif parts[0] == "e" and len(parts) == 3:
            src, dst = parts[1], parts[2]
            for x in (src, dst):
                if x not in known:
                    raise DagError(f"unknown vertex {x!r} in edge", lineno)
            if src == dst:
                raise DagError(f"cycle detected: self-loop on {src!r}", lineno)
            if (src, dst) in edges:
                raise DagError(f"duplicate edge {src} -> {dst}", lineno)
            if reaches(dst, src):
                raise DagError(f"cycle detected: edge {src} -> {dst} closes a cycle", lineno)
            edges.append((src, dst))
            succ.setdefault(src, set()).add(dst)
        else:
            raise DagError(f"unrecognised line {raw!r}", lineno)
    return Dag(vertices, edges, lattice_cap=lattice_cap)


def brute_force_closed_sets(d: Dag) -> list[frozenset[str]]:
    """Power-set filter by the closure definition; a test oracle, exponential."""
    vs = d.order
    out = []
    for mask in range(1 << len(vs)):
        s = frozenset(v for i, v in enumerate(vs) if mask >> i & 1)
        if all(w in s for v in s for w in vs if d.precedes(w, v)):
            out.append(s)
    return out


def random_dag(n: int, edge_prob: float, rng: random.Random, prefix: str = "v") -> Dag:
    """Random DAG on ``n`` vertices: each forward pair of a shuffled order is an
    edge with probability ``edge_prob``."""
    names = [f"{prefix}{i}" for i in range(n)]
    perm = names[:]
    rng.shuffle(perm)
    edges = [
        (perm[i], perm[j])
        for i in range(n)
        for j in range(i + 1, n)
        if rng.random() < edge_prob
    ]
    return Dag(names, edges)


def chain(n: int, prefix: str = "v") -> Dag:
    names = [f"{prefix}{i}" for i in range(1, n + 1)]
    return Dag(names, list(zip(names, names[1:])))


def edgeless(names: Sequence[str]) -> Dag:
    return Dag(names, ())


def fixture_names() -> list[str]:
    root = resources.files("dagexch") / "fixtures"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".dag"))


def load_fixture(name: str) -> Dag:
    name = name[:-4] if name.endswith(".dag") else name
    if name not in fixture_names():
        raise DagError(f"no fixture named {name!r}; have {', '.join(fixture_names())}")
    return parse_dag((resources.files("dagexch") / "fixtures" / f"{name}.dag").read_text())


def load_dag(path_or_name: str) -> Dag:
    """Read a ``.dag`` file, falling back to a shipped fixture of that name."""
    p = Path(path_or_name)
    if p.is_file():
        try:
            text = p.read_text()
        except (OSError, UnicodeDecodeError) as exc:
            raise DagError(f"cannot read {path_or_name}: {exc}") from None
        return parse_dag(text)
    if "/" not in path_or_name:
        return load_fixture(path_or_name)
    raise DagError(f"no such file: {path_or_name}")
