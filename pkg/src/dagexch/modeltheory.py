"""Equivalence classes ``[alpha]_v``, their containment poset and the map
from its anti-chains back to restrictions of ``alpha``.

``[alpha]_v`` is the set of full indices agreeing with ``alpha`` on the downset
of ``v``.  Classes are infinite, so they are handled symbolically: a label
records the vertex and the pinned restriction, and containment is decided from
the DAG order.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Union

from .dag import Dag
from .indices import MultiIndex, MultiIndexError, empty_index, restrict, rstr


class ModelTheoryError(ValueError):
    pass


@dataclass(frozen=True)
class Singleton:
    alpha: MultiIndex

    def __repr__(self) -> str:
        return f"{{{self.alpha}}}"


@dataclass(frozen=True)
class EquivClass:
    """``{beta : beta|downset(v) = key}``."""

    v: str
    key: MultiIndex

    def __post_init__(self):
        if self.key.domain != self.key.dag.downset(self.v):
            raise ModelTheoryError(f"class key for {self.v!r} must have domain downset({self.v})")

    def __repr__(self) -> str:
        return f"[{self.key}]_{self.v}"


ClassLabel = Union[Singleton, EquivClass]
AntiChain = frozenset


def _dag(x: ClassLabel) -> Dag:
    return x.alpha.dag if isinstance(x, Singleton) else x.key.dag


def class_contains(x: ClassLabel, y: ClassLabel) -> bool:
    """Is the set denoted by ``x`` contained in the one denoted by ``y``?"""
    d = _dag(x)
    if _dag(y) != d:
        raise ModelTheoryError("labels over different DAGs")
    if isinstance(y, EquivClass):
        if isinstance(x, Singleton):
            return restrict(x.alpha, d.downset(y.v)) == y.key
        return d.precedes(y.v, x.v) and restrict(x.key, d.downset(y.v)) == y.key
    if isinstance(x, Singleton):
        return x.alpha == y.alpha
    # a class is a single point only when it pins every vertex
    return d.downset(x.v) == d.full and x.key == y.alpha


def same_set(x: ClassLabel, y: ClassLabel) -> bool:
    return class_contains(x, y) and class_contains(y, x)


def _full(a: MultiIndex) -> None:
    if a.domain != a.dag.full:
        raise MultiIndexError(f"need a full-domain index, got domain {sorted(a.domain)}")


def label_key(x: ClassLabel) -> tuple[int, int]:
    return (1, 0) if isinstance(x, Singleton) else (0, _dag(x).ordinal[x.v])


def e_alpha(a: MultiIndex) -> tuple[ClassLabel, ...]:
    """Distinct members of ``{[a]_v : v} + {{a}}`` in canonical vertex order,
    the singleton last.  A class equal to ``{a}`` as a set is kept in place
    of the singleton."""
    _full(a)
    d = a.dag
    out: list[ClassLabel] = [EquivClass(v, restrict(a, d.downset(v))) for v in d.order]
    s = Singleton(a)
    if not any(same_set(s, x) for x in out):
        out.append(s)
    return tuple(out)


def is_antichain(b: Iterable[ClassLabel]) -> bool:
    b = list(b)
    return all(
        not class_contains(x, y) and not class_contains(y, x)
        for i, x in enumerate(b) for y in b[i + 1:]
    )


def antichain_key(b: AntiChain) -> tuple:
    keys = sorted(label_key(x) for x in b)
    return (len(keys), keys)


def b_alpha(a: MultiIndex) -> tuple[AntiChain, ...]:
    """Every anti-chain of ``e_alpha(a)``, the empty one included."""
    elems = e_alpha(a)
    found: list[AntiChain] = []

    def walk(i: int, chosen: tuple[ClassLabel, ...]) -> None:
        if i == len(elems):
            found.append(frozenset(chosen))
            return
        walk(i + 1, chosen)
        x = elems[i]
        if all(not class_contains(x, y) and not class_contains(y, x) for y in chosen):
            walk(i + 1, chosen + (x,))

    walk(0, ())
    return tuple(sorted(found, key=antichain_key))


def phi(d: Dag, b: Iterable[ClassLabel]) -> MultiIndex:
    """``{{a}} -> a``; a set of classes goes to ``a`` restricted to the union of
    their downsets; the empty anti-chain goes to the empty index."""
    b = list(b)
    if not b:
        return empty_index(d)
    if any(_dag(x) != d for x in b):
        raise ModelTheoryError("anti-chain labels over a different DAG")
    if not is_antichain(b):
        raise ModelTheoryError(f"{b} is not an anti-chain")
    singles = [x for x in b if isinstance(x, Singleton)]
    if singles:
        if len(b) != 1:
            raise ModelTheoryError("a singleton is comparable with every class of its index")
        return singles[0].alpha
    merged: dict[str, int] = {}
    for x in b:
        for v, n in x.key.items:
            if merged.setdefault(v, n) != n:
                raise ModelTheoryError(f"classes disagree at {v!r}; not derived from one index")
    return MultiIndex(d, merged)


@dataclass
class PhiReport:
    passed: bool
    antichains: int
    restrictions: int
    max_fiber: int
    duplicate_at: MultiIndex | None = None
    reason: str = ""
    witness: tuple | None = None

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "antichains": self.antichains,
            "restrictions": self.restrictions,
            "max_fiber": self.max_fiber,
            "duplicate_at": None if self.duplicate_at is None else self.duplicate_at.as_dict(),
            "reason": self.reason,
            "witness": None if self.witness is None else [repr(w) for w in self.witness],
        }


def check_phi_properties(d: Dag, a: MultiIndex) -> PhiReport:
    """Surjectivity onto the restrictions of ``a``, fibres of size at most 2,
    and a size-2 fibre only at ``a`` itself: ``{{a}}`` and the maximal classes."""
    if a.dag != d:
        raise ModelTheoryError("index belongs to another DAG")
    _full(a)
    bs = b_alpha(a)
    fibers: dict[MultiIndex, list[AntiChain]] = {}
    for b in bs:
        fibers.setdefault(phi(d, b), []).append(b)
    targets = set(rstr(a))
    big = max(len(f) for f in fibers.values())

    def report(ok, reason="", witness=None, dup=None):
        return PhiReport(ok, len(bs), len(targets), big, dup, reason, witness)

    for img in fibers:
        if img not in targets:
            return report(False, "image outside the restrictions", (img,))
    missing = targets - set(fibers)
    if missing:
        return report(False, "not surjective", (min(missing, key=lambda m: d.set_key(m.domain)),))
    dup = None
    for img, f in fibers.items():
        if len(f) > 2:
            return report(False, "fibre larger than 2", (img, *f))
        if len(f) == 2:
            expected = {frozenset({Singleton(a)}), maximal_classes(a)}
            if img != a or set(f) != expected:
                return report(False, "duplicate preimage away from the expected pair", (img, *f))
            dup = img
    return report(True, dup=dup)


def format_label(x: ClassLabel) -> str:
    return repr(x)


def antichain_table(a: MultiIndex) -> list[dict]:
    """Rows ``{"antichain": [...], "phi": {...}}`` in :func:`b_alpha` order."""
    d = a.dag
    return [
        {"antichain": [format_label(x) for x in sorted(b, key=label_key)], "phi": phi(d, b).as_dict()}
        for b in b_alpha(a)
    ]


def maximal_classes(a: MultiIndex) -> AntiChain:
    d = a.dag
    return frozenset(EquivClass(v, restrict(a, d.downset(v))) for v in d.maximal(d.full))
