"""Representation-based samplers.

An entry of the ``C``-type array is ``f_C`` applied to the uniforms
``U_{alpha|D}`` for every closed ``D`` inside ``C``.  Kernels receive those
uniforms as a mapping ``D -> value`` (floats on the scalar path, 1-d arrays
across replicates on the vectorised path) together with the index itself.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .dag import Dag, DagError
from .indices import MultiIndex, MultiIndexError, Window, enumerate_window, encoding_words, restrict
from .normal import ndtri
from .randomness import SeededSource, replicate_ivs, uniform_at, uniform_words

Kernel = Callable[[Mapping[frozenset, object], MultiIndex], object]
Entry = tuple[frozenset, MultiIndex]

BUILTIN_MODELS = ("uniform-pass", "hierarchical-gaussian", "nonexch-control")


class ModelError(ValueError):
    pass


@dataclass
class RepresentationModel:
    dag: Dag
    collection: tuple[frozenset, ...]
    kernels: dict[frozenset, Kernel]
    value_space: str = "real"
    name: str = ""
    _levels: dict[frozenset, tuple[frozenset, ...]] = field(init=False, repr=False)

    def __post_init__(self):
        self.collection = tuple(frozenset(c) for c in self.collection)
        if len(set(self.collection)) != len(self.collection):
            raise ModelError("collection members must be distinct")
        for c in self.collection:
            if not self.dag.is_closed(c):
                raise ModelError(f"collection member {sorted(c)} is not closed")
            if c not in self.kernels:
                raise ModelError(f"no kernel for {sorted(c)}")
        if self.value_space not in ("real", "integer", "bit"):
            raise ModelError(f"unknown value space {self.value_space!r}")
        self._levels = {c: self.dag.closed_subsets(c) for c in self.collection}

    def levels(self, c: frozenset) -> tuple[frozenset, ...]:
        return self._levels[c]

    def entries(self, w: Mapping[str, int]) -> list[Entry]:
        return [(c, a) for c in self.collection for a in enumerate_window(self.dag, c, w)]

    def _check(self, c: frozenset, a: MultiIndex) -> None:
        if c not in self._levels:
            raise ModelError(f"{sorted(c)} is not in the model's collection")
        if a.domain != c:
            raise MultiIndexError(f"index {a} does not have domain {sorted(c)}")

    def sample_matrix(self, src: SeededSource, entries: Sequence[Entry], reps: int, start: int = 0) -> np.ndarray:
        """Entries for replicates ``start .. start+reps-1``, shape ``(reps, len(entries))``.

        Row ``r`` equals ``sample_entry(self, src.replicate(start + r), C, a)``.
        """
        for c, a in entries:
            self._check(c, a)
        ivs = replicate_ivs(src, reps, start)[:, None, :]
        keys: dict[MultiIndex, None] = {}
        for c, a in entries:
            for d in self._levels[c]:
                keys.setdefault(restrict(a, d))
        by_len: dict[int, list[MultiIndex]] = {}
        for k in keys:
            by_len.setdefault(len(k), []).append(k)
        column: dict[MultiIndex, np.ndarray] = {}
        for group in by_len.values():
            words = np.array([encoding_words(k) for k in group], dtype=np.uint64)
            u = uniform_words(src.seed, ivs, words[None, :, :])
            for j, k in enumerate(group):
                column[k] = u[:, j]
        out = np.empty((reps, len(entries)))
        for j, (c, a) in enumerate(entries):
            u = {d: column[restrict(a, d)] for d in self._levels[c]}
            out[:, j] = self.kernels[c](u, a)
        return out


def sample_entry(m: RepresentationModel, src: SeededSource, c: Iterable[str], a: MultiIndex):
    c = frozenset(c)
    m._check(c, a)
    u = {d: uniform_at(src, restrict(a, d)) for d in m.levels(c)}
    return m.kernels[c](u, a)


def sample_window(m: RepresentationModel, src: SeededSource, w: Window) -> dict[Entry, object]:
    missing = [v for v in m.dag.vertices if v not in w]
    if missing:
        raise MultiIndexError(f"window has no bound for {missing[0]!r}")
    return {(c, a): sample_entry(m, src, c, a) for c, a in m.entries(w)}


def _safe(u):
    # u == 0 happens with probability 2**-53; keep the quantile finite
    return np.where(np.asarray(u) > 0, u, 2.0**-54)


def builtin_model(name: str, dag: Dag, collection: Sequence[Iterable[str]] | None = None) -> RepresentationModel:
    """Illustrative kernels.

    ``uniform-pass`` returns the top-level uniform; ``hierarchical-gaussian``
    sums normal quantiles of every level; ``nonexch-control`` adds
    ``a(v1)/(1+a(v1))`` for the first canonical vertex ``v1`` and is therefore
    *not* DAG-exchangeable.
    """
    coll = tuple(frozenset(c) for c in (collection or [dag.full]))
    if name == "uniform-pass":
        def make(c):
            return lambda u, a: u[c]
    elif name == "hierarchical-gaussian":
        def make(c):
            return lambda u, a: sum(ndtri(_safe(x)) for x in u.values())
    elif name == "nonexch-control":
        if not dag.vertices:
            raise DagError("nonexch-control needs a nonempty DAG")
        first = dag.order[0]

        def make(c):
            if first not in c:
                return lambda u, a: u[c]
            return lambda u, a: u[c] + a[first] / (1.0 + a[first])
    else:
        raise ModelError(f"unknown model {name!r}; choose from {', '.join(BUILTIN_MODELS)}")
    return RepresentationModel(dag, coll, {c: make(c) for c in coll}, "real", name)
