"""The infinite relational model, generatively and through its representation.

Generative form: rows and columns join through Chinese restaurant processes
and each (sort, genre) block has a Polya urn for like/dislike.  Representation
form: stick-breaking partitions of [0, 1] for rows and columns, i.i.d. block
probabilities, a uniform mark per row and column, and an entry uniform per
cell.  Both run off the keyed PRF, as scalar (stateful / lazy) objects and as
numpy samplers over many replicates that reproduce the scalar draws exactly.

Replicate ``r`` of a sampler reads the stream ``src.replicate(r)``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from math import prod
from typing import Iterator, Mapping, Sequence

import numpy as np
from scipy.special import betaincinv

from .dag import Dag
from .indices import MultiIndex, MultiIndexError, encoding_words, enumerate_window, restrict
from .randomness import SeededSource, replicate_ivs, uniform, uniform_words, words_key

TAG_DRAW = 1
TAG_ROW_MARK = 2
TAG_COL_MARK = 3
TAG_ROW_STICK = 4
TAG_COL_STICK = 5
TAG_BLOCK = 6
TAG_ENTRY = 7
TAG_MARK = 8

ORACLE_MAX_CELLS = 12
_CHUNK = 200_000


class IrmError(ValueError):
    pass


@dataclass(frozen=True)
class IrmConfig:
    concentration: float = 1.0
    prior: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        if self.concentration <= 0 or min(self.prior) <= 0:
            raise IrmError("concentration and prior parameters must be positive")


DEFAULT = IrmConfig()


# -- generative form -------------------------------------------------------


@dataclass
class IrmState:
    """Mutable CRP / Polya-urn state.

    Each random choice consumes the next draw number; the uniform for draw
    ``d`` is keyed by ``(TAG_DRAW, d)`` in the caller's stream.
    """

    config: IrmConfig = DEFAULT
    sort_counts: list[int] = field(default_factory=list)
    genre_counts: list[int] = field(default_factory=list)
    row_sort: list[int] = field(default_factory=list)
    col_genre: list[int] = field(default_factory=list)
    blocks: dict[tuple[int, int], list[int]] = field(default_factory=dict)
    entries: dict[tuple[int, int], int] = field(default_factory=dict)
    draws: int = 0

    def _u(self, src: SeededSource) -> float:
        u = uniform(src, words_key((TAG_DRAW, self.draws)))
        self.draws += 1
        return u

    def check(self) -> None:
        assert sum(self.sort_counts) == len(self.row_sort)
        assert sum(self.genre_counts) == len(self.col_genre)
        assert all(c > 0 for c in self.sort_counts + self.genre_counts)
        tally: dict[tuple[int, int], int] = {}
        for (r, c) in self.entries:
            key = (self.row_sort[r], self.col_genre[c])
            tally[key] = tally.get(key, 0) + 1
        for key, (a, b) in self.blocks.items():
            assert a + b == tally.get(key, 0), key


def crp_probabilities(counts: Sequence[int], concentration: float = 1.0) -> list[float]:
    """Probabilities of joining each existing cluster, then of opening a new one."""
    total = concentration + sum(counts)
    return [c / total for c in counts] + [concentration / total]


def _crp_pick(counts: Sequence[int], u: float, concentration: float) -> int:
    total = concentration + sum(counts)
    cum = 0
    for i, c in enumerate(counts):
        cum += c
        if u < cum / total:
            return i
    return len(counts)


def irm_entry_urn(st: IrmState, i: int, j: int, src: SeededSource) -> int:
    """Like/dislike draw from block ``(i, j)``'s urn; updates the block counts."""
    a0, b0 = st.config.prior
    a, b = st.blocks.setdefault((i, j), [0, 0])
    bit = int(st._u(src) < (a + a0) / (a + b + a0 + b0))
    st.blocks[(i, j)][0 if bit else 1] += 1
    return bit


def _new_member(st: IrmState, src: SeededSource, counts: list[int]) -> int:
    k = _crp_pick(counts, st._u(src), st.config.concentration)
    if k == len(counts):
        counts.append(0)
    counts[k] += 1
    return k


def irm_new_row(st: IrmState, src: SeededSource) -> int:
    sort = _new_member(st, src, st.sort_counts)
    st.row_sort.append(sort)
    r = len(st.row_sort) - 1
    for c, genre in enumerate(st.col_genre):
        st.entries[(r, c)] = irm_entry_urn(st, sort, genre, src)
    return sort


def irm_new_column(st: IrmState, src: SeededSource) -> int:
    genre = _new_member(st, src, st.genre_counts)
    st.col_genre.append(genre)
    c = len(st.col_genre) - 1
    for r, sort in enumerate(st.row_sort):
        st.entries[(r, c)] = irm_entry_urn(st, sort, genre, src)
    return genre


def _check_size(m: int, n: int) -> None:
    if m < 1 or n < 1:
        raise IrmError("matrix sizes must be at least 1")


def irm_submatrix_generative(m: int, n: int, src: SeededSource, config: IrmConfig = DEFAULT) -> np.ndarray:
    """Rows and columns are created alternately, row first."""
    _check_size(m, n)
    st = IrmState(config)
    for k in range(max(m, n)):
        if k < m:
            irm_new_row(st, src)
        if k < n:
            irm_new_column(st, src)
    out = np.zeros((m, n), dtype=np.int8)
    for (r, c), bit in st.entries.items():
        out[r, c] = bit
    return out


def _draw(seed, ivs, d):
    return uniform_words(seed, ivs, np.array([TAG_DRAW, d], dtype=np.uint64))


def _generative_chunk(m, n, src, ivs, config):
    reps = ivs.shape[0]
    gam = config.concentration
    a0, b0 = config.prior
    rows = np.arange(reps)
    sort = np.zeros((reps, m), dtype=np.int64)
    genre = np.zeros((reps, n), dtype=np.int64)
    scount = np.zeros((reps, m + 1), dtype=np.int64)
    gcount = np.zeros((reps, n + 1), dtype=np.int64)
    nsorts = np.zeros(reps, dtype=np.int64)
    ngenres = np.zeros(reps, dtype=np.int64)
    likes = np.zeros((reps, m, n), dtype=np.int64)
    dislikes = np.zeros((reps, m, n), dtype=np.int64)
    out = np.zeros((reps, m, n), dtype=np.int8)
    d = 0

    def pick(counts, nk, created):
        nonlocal d
        u = _draw(src.seed, ivs, d)
        d += 1
        total = gam + created
        choice = nk.copy()
        done = np.zeros(reps, dtype=bool)
        cum = np.zeros(reps, dtype=np.int64)
        for k in range(created):
            cum = cum + counts[:, k]
            hit = ~done & (u < cum / total)
            choice[hit] = k
            done |= hit
        return choice

    def urn(r, c):
        nonlocal d
        s, g = sort[:, r], genre[:, c]
        a, b = likes[rows, s, g], dislikes[rows, s, g]
        u = _draw(src.seed, ivs, d)
        d += 1
        bit = u < (a + a0) / (a + b + a0 + b0)
        likes[rows, s, g] += bit
        dislikes[rows, s, g] += ~bit
        out[:, r, c] = bit

    for k in range(max(m, n)):
        if k < m:
            s = pick(scount, nsorts, k)
            nsorts += s == nsorts
            scount[rows, s] += 1
            sort[:, k] = s
            for c in range(min(k, n)):
                urn(k, c)
        if k < n:
            g = pick(gcount, ngenres, k)
            ngenres += g == ngenres
            gcount[rows, g] += 1
            genre[:, k] = g
            for r in range(min(k + 1, m)):
                urn(r, k)
    return out


def sample_generative(m: int, n: int, src: SeededSource, reps: int, start: int = 0,
                      config: IrmConfig = DEFAULT) -> np.ndarray:
    """``(reps, m, n)`` generative samples; slice ``r`` equals
    ``irm_submatrix_generative(m, n, src.replicate(start + r))``."""
    _check_size(m, n)
    parts = [
        _generative_chunk(m, n, src, replicate_ivs(src, min(_CHUNK, reps - lo), start + lo), config)
        for lo in range(0, reps, _CHUNK)
    ]
    return np.concatenate(parts) if parts else np.zeros((0, m, n), dtype=np.int8)


# -- representation form ----------------------------------------------------


def stick_fraction(u, concentration: float):
    """Beta(1, concentration) by inversion."""
    if concentration == 1.0:
        return u
    return 1.0 - (1.0 - u) ** (1.0 / concentration)


def block_probability(u, prior: tuple[float, float]):
    """Beta(prior) by inversion."""
    if tuple(prior) == (1.0, 1.0):
        return u
    return betaincinv(prior[0], prior[1], u)


class LazySticks:
    """Stick-breaking partition of [0, 1], extended on demand.

    Stick ``k`` is keyed by ``base + (k,)``.  A mark ``x`` falls in the first
    stick ``k`` whose leftover mass drops below ``1 - x``; computing with the
    leftover product avoids cancellation near 1.
    """

    def __init__(self, src: SeededSource, base: tuple[int, ...], concentration: float = 1.0):
        self.src = src
        self.base = tuple(base)
        self.concentration = concentration
        self.leftover: list[float] = []

    def _extend(self) -> None:
        k = len(self.leftover)
        v = stick_fraction(uniform(self.src, words_key(self.base + (k,))), self.concentration)
        prev = self.leftover[-1] if self.leftover else 1.0
        self.leftover.append(prev * (1.0 - v))

    def weights(self) -> list[float]:
        prev, out = 1.0, []
        for rem in self.leftover:
            out.append(prev - rem)
            prev = rem
        return out

    def locate(self, mark: float) -> int:
        gap = 1.0 - mark
        for k, rem in enumerate(self.leftover):
            if rem < gap:
                return k
        while True:
            self._extend()
            if self.leftover[-1] < gap:
                return len(self.leftover) - 1


class IrmRepresentation:
    """Lazy representation-form IRM; every value is a pure function of ``src``."""

    def __init__(self, src: SeededSource, config: IrmConfig = DEFAULT, base: tuple[int, ...] = ()):
        self.src = src
        self.config = config
        self.base = tuple(base)
        self.row_sticks = LazySticks(src, self.base + (TAG_ROW_STICK,), config.concentration)
        self.col_sticks = LazySticks(src, self.base + (TAG_COL_STICK,), config.concentration)

    def _u(self, *words: int) -> float:
        return uniform(self.src, words_key(self.base + words))

    def row_mark(self, i: int) -> float:
        return self._u(TAG_ROW_MARK, i)

    def col_mark(self, j: int) -> float:
        return self._u(TAG_COL_MARK, j)

    def sort(self, i: int) -> int:
        return self.row_sticks.locate(self.row_mark(i))

    def genre(self, j: int) -> int:
        return self.col_sticks.locate(self.col_mark(j))

    def block(self, s: int, g: int) -> float:
        return float(block_probability(self._u(TAG_BLOCK, s, g), self.config.prior))

    def entry(self, i: int, j: int) -> int:
        return int(self._u(TAG_ENTRY, i, j) < self.block(self.sort(i), self.genre(j)))

    def submatrix(self, m: int, n: int) -> np.ndarray:
        _check_size(m, n)
        return np.array([[self.entry(i, j) for j in range(n)] for i in range(m)], dtype=np.int8)


def irm_submatrix_representation(m: int, n: int, src: SeededSource, config: IrmConfig = DEFAULT) -> np.ndarray:
    return IrmRepresentation(src, config).submatrix(m, n)


def locate_np(seed: int, ivs: np.ndarray, base: tuple[int, ...], marks: np.ndarray,
              concentration: float = 1.0) -> np.ndarray:
    """Vectorised :meth:`LazySticks.locate`: ``marks`` is ``(reps, M)``, one
    stick sequence per replicate row."""
    reps, width = marks.shape
    gap = 1.0 - marks
    leftover = np.ones(reps)
    out = np.full((reps, width), -1, dtype=np.int64)
    active = np.arange(reps)
    k = 0
    while active.size:
        u = uniform_words(seed, ivs[active], np.array(base + (k,), dtype=np.uint64))
        leftover[active] = leftover[active] * (1.0 - stick_fraction(u, concentration))
        sub = out[active]
        hit = (sub < 0) & (leftover[active][:, None] < gap[active])
        sub[hit] = k
        out[active] = sub
        active = active[(sub < 0).any(axis=1)]
        k += 1
    return out


def _grid_words(*cols) -> np.ndarray:
    return np.stack(np.broadcast_arrays(*[np.asarray(c, dtype=np.uint64) for c in cols]), axis=-1)


def _representation_chunk(m, n, src, ivs, config):
    seed = src.seed
    iv2 = ivs[:, None, :]
    rmarks = uniform_words(seed, iv2, _grid_words(TAG_ROW_MARK, np.arange(m))[None])
    cmarks = uniform_words(seed, iv2, _grid_words(TAG_COL_MARK, np.arange(n))[None])
    sorts = locate_np(seed, ivs, (TAG_ROW_STICK,), rmarks, config.concentration)
    genres = locate_np(seed, ivs, (TAG_COL_STICK,), cmarks, config.concentration)
    iv3 = ivs[:, None, None, :]
    e = block_probability(
        uniform_words(seed, iv3, _grid_words(TAG_BLOCK, sorts[:, :, None], genres[:, None, :])),
        config.prior,
    )
    ij = _grid_words(TAG_ENTRY, np.arange(m)[:, None], np.arange(n)[None, :])[None]
    x = uniform_words(seed, iv3, ij)
    return (x < e).astype(np.int8)


def sample_representation(m: int, n: int, src: SeededSource, reps: int, start: int = 0,
                          config: IrmConfig = DEFAULT) -> np.ndarray:
    """``(reps, m, n)`` samples; slice ``r`` equals
    ``irm_submatrix_representation(m, n, src.replicate(start + r))``."""
    _check_size(m, n)
    parts = [
        _representation_chunk(m, n, src, replicate_ivs(src, min(_CHUNK, reps - lo), start + lo), config)
        for lo in range(0, reps, _CHUNK)
    ]
    return np.concatenate(parts) if parts else np.zeros((0, m, n), dtype=np.int8)


# -- exact law ---------------------------------------------------------------


def set_partitions(n: int) -> Iterator[tuple[int, ...]]:
    """Restricted growth strings: ``labels[i]`` is the block of element ``i``."""
    if n == 0:
        yield ()
        return

    def grow(prefix, top):
        if len(prefix) == n:
            yield tuple(prefix)
            return
        for b in range(top + 2):
            yield from grow(prefix + [b], max(top, b))

    yield from grow([0], 0)


def _rising(x, k: int):
    return prod((x + i for i in range(k)), start=Fraction(1) if isinstance(x, Fraction) else 1)


def crp_partition_probability(labels: Sequence[int], concentration=1) -> Fraction:
    """Exchangeable partition probability of the CRP for one labelling."""
    sizes = np.bincount(labels) if len(labels) else []
    num = prod((_rising(1, int(s) - 1) for s in sizes), start=Fraction(1))
    gam = Fraction(concentration)
    return gam ** len(sizes) * num / _rising(gam, len(labels))


def pattern_key(bits) -> str:
    return "".join(str(int(b)) for b in np.asarray(bits).ravel())


def all_patterns(m: int, n: int) -> list[str]:
    k = m * n
    return [format(code, f"0{k}b") for code in range(2**k)]


def irm_exact_oracle(m: int, n: int, concentration=1, prior=(1, 1)) -> dict[str, Fraction]:
    """Exact law of an ``m x n`` IRM submatrix (row-major bit-string keys).

    Brute force over pairs of set partitions; independent of both samplers.
    """
    _check_size(m, n)
    if m * n > ORACLE_MAX_CELLS:
        raise IrmError(f"oracle limited to {ORACLE_MAX_CELLS} cells, got {m * n}")
    a0, b0 = Fraction(prior[0]), Fraction(prior[1])
    law = {p: Fraction(0) for p in all_patterns(m, n)}
    bit_grid = [tuple(int(ch) for ch in p) for p in law]
    for rho in set_partitions(m):
        p_rho = crp_partition_probability(rho, concentration)
        for sigma in set_partitions(n):
            weight = p_rho * crp_partition_probability(sigma, concentration)
            block_of = [(rho[i], sigma[j]) for i in range(m) for j in range(n)]
            for key, bits in zip(law, bit_grid):
                ones: dict[tuple[int, int], int] = {}
                zeros: dict[tuple[int, int], int] = {}
                for blk, bit in zip(block_of, bits):
                    tgt = ones if bit else zeros
                    tgt[blk] = tgt.get(blk, 0) + 1
                pr = weight
                for blk in set(block_of):
                    a, b = ones.get(blk, 0), zeros.get(blk, 0)
                    pr *= _rising(a0, a) * _rising(b0, b) / _rising(a0 + b0, a + b)
                law[key] += pr
    return law


def pattern_frequencies(samples: np.ndarray) -> dict[str, float]:
    """Empirical pattern law of ``(reps, m, n)`` bit samples."""
    reps, m, n = samples.shape
    k = m * n
    weights = 1 << np.arange(k - 1, -1, -1, dtype=np.int64)
    codes = samples.reshape(reps, k).astype(np.int64) @ weights
    counts = np.bincount(codes, minlength=2**k)
    return {format(c, f"0{k}b"): counts[c] / reps for c in range(2**k)}


def irm_compare(m: int, n: int, samples: int, src: SeededSource, config: IrmConfig = DEFAULT) -> dict:
    from .stats import tv_distance

    gen = pattern_frequencies(sample_generative(m, n, src.child("generative"), samples, config=config))
    rep = pattern_frequencies(sample_representation(m, n, src.child("representation"), samples, config=config))
    exact = irm_exact_oracle(m, n, Fraction(config.concentration), tuple(Fraction(p) for p in config.prior))
    exact_f = {k: float(v) for k, v in exact.items()}
    return {
        "rows": m,
        "cols": n,
        "samples": samples,
        "patterns": [
            {"pattern": k, "generative": gen[k], "representation": rep[k], "oracle": exact_f[k]}
            for k in exact
        ],
        "tv": {
            "generative_vs_oracle": tv_distance(gen, exact_f),
            "representation_vs_oracle": tv_distance(rep, exact_f),
            "generative_vs_representation": tv_distance(gen, rep),
        },
    }


# -- nested IRM on the random-block-matrix DAG --------------------------------


def block_matrix_dag() -> Dag:
    return Dag(["r0", "c0", "r1", "c1"], [("r0", "r1"), ("r0", "c1"), ("c0", "r1"), ("c0", "c1")])


class NestedIrm:
    """Outer IRM over ``(r0, c0)`` whose every cell carries its own IRM over
    ``(r1, c1)``; the collection is ``({r0, c0}, G)``.

    All randomness is keyed by multi-index encodings: outer sticks and block
    probabilities by the empty index, outer row/column marks by ``(r0)`` /
    ``(c0)``, the outer entry and the nested sticks/blocks by ``(r0, c0)``,
    nested marks by ``(r0, c0, r1)`` / ``(r0, c0, c1)``, the nested entry by the
    full index.
    """

    def __init__(self, config: IrmConfig = DEFAULT):
        self.dag = block_matrix_dag()
        self.config = config
        self.outer = frozenset({"r0", "c0"})
        self.collection = (self.outer, self.dag.full)

    def _enc(self, a: MultiIndex, *tags: int) -> tuple[int, ...]:
        return encoding_words(a) + tags

    def _parts(self, a: MultiIndex):
        """(stick base index, row-mark index, col-mark index, entry index) for an entry."""
        if a.domain == self.outer:
            return (restrict(a, ()), restrict(a, {"r0"}), restrict(a, {"c0"}), a)
        cell = restrict(a, self.outer)
        return (cell, restrict(a, self.outer | {"r1"}), restrict(a, self.outer | {"c1"}), a)

    def _check(self, c, a):
        if c not in self.collection or a.domain != c:
            raise MultiIndexError(f"entry ({sorted(c)}, {a}) is not in the collection")

    def entry(self, src: SeededSource, c, a: MultiIndex, _sticks: dict | None = None) -> int:
        c = frozenset(c)
        self._check(c, a)
        sticks = {} if _sticks is None else _sticks
        base, rm, cm, ent = self._parts(a)
        rs = sticks.setdefault((base, TAG_ROW_STICK), LazySticks(src, self._enc(base, TAG_ROW_STICK), self.config.concentration))
        cs = sticks.setdefault((base, TAG_COL_STICK), LazySticks(src, self._enc(base, TAG_COL_STICK), self.config.concentration))
        s = rs.locate(uniform(src, words_key(self._enc(rm, TAG_MARK))))
        g = cs.locate(uniform(src, words_key(self._enc(cm, TAG_MARK))))
        e = block_probability(uniform(src, words_key(self._enc(base, TAG_BLOCK, s, g))), self.config.prior)
        return int(uniform(src, words_key(self._enc(ent, TAG_ENTRY))) < e)

    def entries(self, w: Mapping[str, int]) -> list[tuple[frozenset, MultiIndex]]:
        return [(c, a) for c in self.collection for a in enumerate_window(self.dag, c, w)]

    def sample(self, src: SeededSource, outer: tuple[int, int], inner: tuple[int, int]) -> dict:
        (m, n), (p, q) = outer, inner
        if min(m, n, p, q) < 1:
            raise IrmError("sizes must be at least 1")
        w = {"r0": m, "c0": n, "r1": p, "c1": q}
        sticks: dict = {}
        return {(c, a): self.entry(src, c, a, sticks) for c, a in self.entries(w)}

    def sample_matrix(self, src: SeededSource, entries, reps: int, start: int = 0) -> np.ndarray:
        for c, a in entries:
            self._check(frozenset(c), a)
        ivs = replicate_ivs(src, reps, start)
        seed = src.seed
        iv2 = ivs[:, None, :]

        def u_of(words_list):
            arr = np.array(words_list, dtype=np.uint64)
            return uniform_words(seed, iv2, arr[None])

        parts = [self._parts(a) for _, a in entries]
        out = np.empty((reps, len(entries)))
        # group by stick base so each base runs one stick sequence per replicate
        by_base: dict[MultiIndex, list[int]] = {}
        for j, (base, *_rest) in enumerate(parts):
            by_base.setdefault(base, []).append(j)
        for base, cols in by_base.items():
            rmarks = u_of([self._enc(parts[j][1], TAG_MARK) for j in cols])
            cmarks = u_of([self._enc(parts[j][2], TAG_MARK) for j in cols])
            s = locate_np(seed, ivs, self._enc(base, TAG_ROW_STICK), rmarks, self.config.concentration)
            g = locate_np(seed, ivs, self._enc(base, TAG_COL_STICK), cmarks, self.config.concentration)
            bw = np.array(self._enc(base, TAG_BLOCK), dtype=np.uint64)
            words = np.concatenate(
                [np.broadcast_to(bw, s.shape + bw.shape), s[..., None].astype(np.uint64), g[..., None].astype(np.uint64)],
                axis=-1,
            )
            e = block_probability(uniform_words(seed, iv2, words), self.config.prior)
            x = u_of([self._enc(parts[j][3], TAG_ENTRY) for j in cols])
            out[:, cols] = x < e
        return out


def nested_irm_sample(outer: tuple[int, int], inner: tuple[int, int], src: SeededSource,
                      config: IrmConfig = DEFAULT) -> dict:
    return NestedIrm(config).sample(src, outer, inner)
