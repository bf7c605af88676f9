"""G-automorphisms as ancestor-keyed families of finite permutations.

For each vertex ``v`` the automorphism holds a table mapping the restriction of
the input to the strict ancestors of ``v`` to a permutation of ``v``'s value.
Keys missing from a table get the identity.  Any such table family is a
G-automorphism, because ancestor sets are closed.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

from .dag import Dag
from .indices import MultiIndex, MultiIndexError, Window, canonical_encoding, enumerate_window
from .randomness import FinitePermutation, SeededSource, random_finite_permutation


class AutomorphismError(ValueError):
    pass


class WindowTooSmall(AutomorphismError):
    pass


class HomomorphismError(AutomorphismError):
    """The input pairs are not a G-homomorphism; ``witness`` is ``(alpha, beta, closed_set)``."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


_IDENTITY = FinitePermutation(())


class HierAutomorphism:
    def __init__(self, dag: Dag, tables: Mapping[str, Mapping[MultiIndex, FinitePermutation]] | None = None):
        self.dag = dag
        self._anc = {v: dag.sort(dag.ancestors(v)) for v in dag.vertices}
        self._tab: dict[str, dict[tuple[int, ...], FinitePermutation]] = {v: {} for v in dag.vertices}
        for v, table in (tables or {}).items():
            if v not in dag:
                raise AutomorphismError(f"unknown vertex {v!r}")
            anc = self._anc[v]
            for key, perm in table.items():
                if key.domain != frozenset(anc):
                    raise AutomorphismError(
                        f"key {key} for {v!r} must have domain {list(anc)} (the strict ancestors)"
                    )
                if not isinstance(perm, FinitePermutation):
                    raise AutomorphismError(f"table entry for {v!r} is not a FinitePermutation")
                if not perm.is_identity():
                    self._tab[v][tuple(key[w] for w in anc)] = perm

    @classmethod
    def identity(cls, dag: Dag) -> "HierAutomorphism":
        return cls(dag)

    def tables(self) -> dict[str, dict[MultiIndex, FinitePermutation]]:
        return {
            v: {MultiIndex(self.dag, zip(self._anc[v], k)): p for k, p in sorted(self._tab[v].items())}
            for v in self.dag.order
        }

    def perm(self, v: str, key: MultiIndex) -> FinitePermutation:
        return self._tab[v].get(tuple(key[w] for w in self._anc[v]), _IDENTITY)

    @property
    def support(self) -> int:
        return max((p.support for t in self._tab.values() for p in t.values()), default=1)

    def is_identity(self) -> bool:
        return not any(self._tab.values())

    def _apply_dict(self, vals: Mapping[str, int]) -> dict[str, int]:
        out = {}
        for v, n in vals.items():
            p = self._tab[v].get(tuple(vals[w] for w in self._anc[v]))
            out[v] = p(n) if p is not None else n
        return out

    def __call__(self, a: MultiIndex) -> MultiIndex:
        return apply(self, a)

    def __repr__(self) -> str:
        n = sum(len(t) for t in self._tab.values())
        return f"HierAutomorphism({self.dag!r}, {n} non-identity entries)"


def apply(t: HierAutomorphism, a: MultiIndex) -> MultiIndex:
    if not t.dag.is_closed(a.domain):
        raise MultiIndexError(f"automorphisms act on closed domains, got {sorted(a.domain)}")
    return MultiIndex(a.dag, t._apply_dict(a.as_dict()))


@dataclass
class VerificationReport:
    passed: bool
    checked_points: int
    checked_sets: int
    reason: str = ""
    counterexample: tuple[MultiIndex, MultiIndex, frozenset] | None = None

    def to_json(self) -> dict:
        out = {
            "passed": self.passed,
            "checked_points": self.checked_points,
            "checked_closed_sets": self.checked_sets,
            "reason": self.reason,
        }
        if self.counterexample is not None:
            a, b, c = self.counterexample
            out["counterexample"] = {
                "alpha": a.as_dict(),
                "beta": b.as_dict(),
                "closed_set": list(a.dag.sort(c)),
            }
        return out


def verify_map(dag: Dag, fn: Callable[[MultiIndex], MultiIndex], w: Window) -> VerificationReport:
    """Check the restriction-pattern condition of a G-automorphism on a window.

    For each closed ``C`` the condition over all pairs is equivalent to
    ``alpha|C -> fn(alpha)|C`` being a well-defined injection on the window,
    which is what gets checked; a violating pair is returned on failure.
    """
    points = enumerate_window(dag, dag.full, w)
    images = [fn(a) for a in points]
    for a, b in zip(points, images):
        if b.domain != a.domain or not w.contains(b):
            raise WindowTooSmall(f"image {b} of {a} escapes the window {dict(w)}")
    closed = dag.closed_sets
    for c in closed:
        cv = dag.sort(c)
        forward: dict[tuple, tuple[tuple, int]] = {}
        backward: dict[tuple, tuple[tuple, int]] = {}
        for i, (a, b) in enumerate(zip(points, images)):
            ka = tuple(a[v] for v in cv)
            kb = tuple(b[v] for v in cv)
            seen = forward.setdefault(ka, (kb, i))
            if seen[0] != kb:
                return VerificationReport(
                    False, len(points), len(closed),
                    "equal restrictions mapped to different restrictions",
                    (points[seen[1]], a, c),
                )
            seen = backward.setdefault(kb, (ka, i))
            if seen[0] != ka:
                return VerificationReport(
                    False, len(points), len(closed),
                    "different restrictions mapped to equal restrictions",
                    (points[seen[1]], a, c),
                )
    if len(set(images)) != len(points) or set(images) != set(points):
        return VerificationReport(False, len(points), len(closed), "not a bijection of the window")
    return VerificationReport(True, len(points), len(closed))


def verify_automorphism(t: HierAutomorphism, w: Window) -> VerificationReport:
    return verify_map(t.dag, lambda a: MultiIndex(a.dag, t._apply_dict(a.as_dict())), w)


def generate_random(d: Dag, src: SeededSource, k: int) -> HierAutomorphism:
    """Independent random permutations of ``1..k`` for every ancestor key in ``[1..k]``."""
    if k < 1:
        raise AutomorphismError("support bound must be at least 1")
    tables = {}
    for v in d.order:
        prefix = struct.pack(">I", d.ordinal[v])
        tables[v] = {
            key: random_finite_permutation(src, prefix + canonical_encoding(key), k)
            for key in enumerate_window(d, d.ancestors(v), {w: k for w in d.vertices})
        }
    return HierAutomorphism(d, tables)


def _check_same_dag(t1: HierAutomorphism, t2: HierAutomorphism) -> None:
    if t1.dag != t2.dag:
        raise AutomorphismError("automorphisms over different DAGs")


def invert(t: HierAutomorphism) -> HierAutomorphism:
    d = t.dag
    tables: dict[str, dict[MultiIndex, FinitePermutation]] = {}
    for v, table in t.tables().items():
        # the inverse at v is looked up by the *image* of the ancestor key
        tables[v] = {apply(t, key): p.inverse() for key, p in table.items()}
    return HierAutomorphism(d, tables)


def compose(t1: HierAutomorphism, t2: HierAutomorphism) -> HierAutomorphism:
    """``t1`` after ``t2``."""
    _check_same_dag(t1, t2)
    d = t1.dag
    inv2 = invert(t2)
    tab1, tab2 = t1.tables(), t2.tables()
    tables = {}
    for v in d.order:
        keys = set(tab2[v]) | {apply(inv2, k1) for k1 in tab1[v]}
        tables[v] = {key: t2.perm(v, key).then(t1.perm(v, apply(t2, key))) for key in keys}
    return HierAutomorphism(d, tables)


def check_homomorphism(d: Dag, pairs: Sequence[tuple[MultiIndex, MultiIndex]]):
    """Return ``None`` if the finite map is a G-homomorphism, else ``(alpha, beta, C)``."""
    for c in d.closed_sets:
        cv = d.sort(c)
        forward: dict[tuple, tuple[tuple, int]] = {}
        backward: dict[tuple, tuple[tuple, int]] = {}
        for i, (a, b) in enumerate(pairs):
            ka = tuple(a[v] for v in cv)
            kb = tuple(b[v] for v in cv)
            seen = forward.setdefault(ka, (kb, i))
            if seen[0] != kb:
                return (pairs[seen[1]][0], a, c)
            seen = backward.setdefault(kb, (ka, i))
            if seen[0] != ka:
                return (pairs[seen[1]][0], a, c)
    return None


def _greedy_permutation(required: Mapping[int, int]) -> FinitePermutation:
    k = max([*required, *required.values()])
    used = set(required.values())
    free = iter(t for t in range(1, k + 1) if t not in used)
    image = [required[s] if s in required else next(free) for s in range(1, k + 1)]
    return FinitePermutation(tuple(image))


def extend_homomorphism(d: Dag, pairs: Iterable[tuple[MultiIndex, MultiIndex]]) -> HierAutomorphism:
    """Extend a finite G-homomorphism to a G-automorphism.

    Vertices are handled in topological order.  Sources sharing an ancestor
    restriction share a permutation at ``v``; the required values are placed and
    the remaining sources take the smallest unused targets in increasing order.
    """
    pairs = list(pairs)
    for a, b in pairs:
        if a.domain != d.full or b.domain != d.full:
            raise HomomorphismError(f"pairs must be full-domain indices, got {a} -> {b}")
    bad = check_homomorphism(d, pairs)
    if bad is not None:
        a, b, c = bad
        raise HomomorphismError(
            f"not a G-homomorphism: {a} and {b} violate the condition on {list(d.sort(c))}", bad
        )
    tables = {}
    for v in d.topological_enumeration():
        anc = d.sort(d.ancestors(v))
        required: dict[tuple[int, ...], dict[int, int]] = {}
        for a, b in pairs:
            key = tuple(a[w] for w in anc)
            req = required.setdefault(key, {})
            if req.setdefault(a[v], b[v]) != b[v]:
                raise HomomorphismError(f"conflicting targets for {v}={a[v]} under key {key}")
        table = {}
        for key, req in required.items():
            if len(set(req.values())) != len(req):
                raise HomomorphismError(f"two sources share a target at {v!r} under key {key}")
            table[MultiIndex(d, zip(anc, key))] = _greedy_permutation(req)
        tables[v] = table
    return HierAutomorphism(d, tables)


def automorphism_to_json(t: HierAutomorphism) -> dict:
    return {
        "vertices": list(t.dag.order),
        "tables": {
            v: [{"key": key.as_dict(), "perm": list(p.image)} for key, p in table.items()]
            for v, table in t.tables().items()
        },
    }


def automorphism_from_json(d: Dag, obj: Mapping) -> HierAutomorphism:
    try:
        raw = obj["tables"]
        tables = {
            v: {MultiIndex(d, e["key"]): FinitePermutation(tuple(e["perm"])) for e in entries}
            for v, entries in raw.items()
        }
    except (KeyError, TypeError) as exc:
        raise AutomorphismError(f"malformed automorphism JSON: {exc}") from None
    return HierAutomorphism(d, tables)
