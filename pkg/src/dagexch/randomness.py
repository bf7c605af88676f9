"""Keyed, counter-free uniforms.

Every uniform is a pure function of ``(seed, label, key)``.  The construction is
Philox4x32-10 (Salmon et al., SC'11) used as a 128-bit block cipher keyed by the
64-bit seed, run in CBC-MAC mode over a length-prefixed encoding of the key.
The chaining value starts from a 128-bit BLAKE2b digest of the stream label.
The first two output words form a 64-bit integer ``w``; the uniform is
``(w >> 11) * 2**-53``, which keeps results strictly below 1.

The length prefix makes the message set prefix-free, the condition under which
CBC-MAC behaves as a PRF.  A scalar path (pure Python) and a numpy path are
provided; they agree bit for bit.
"""
from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .indices import MultiIndex, canonical_encoding, encoding_words

PRF_ID = "philox4x32-10-cbcmac+blake2b128-label"

_M0, _M1 = 0xD2511F53, 0xCD9E8D57
_W0, _W1 = 0x9E3779B9, 0xBB67AE85
_MASK32 = 0xFFFFFFFF
_ROUNDS = 10
_TO_UNIT = 2.0**-53


@dataclass(frozen=True)
class SeededSource:
    """A family of independent uniforms named by ``label`` under a 64-bit ``seed``."""

    seed: int
    label: str = "uniforms"
    _iv: tuple[int, int, int, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        digest = hashlib.blake2b(self.label.encode("utf-8"), digest_size=16).digest()
        object.__setattr__(self, "_iv", struct.unpack(">4I", digest))

    @property
    def iv(self) -> tuple[int, int, int, int]:
        return self._iv

    @property
    def philox_key(self) -> tuple[int, int]:
        return (self.seed & _MASK32, self.seed >> 32)

    def child(self, name: str) -> "SeededSource":
        return SeededSource(self.seed, f"{self.label}/{name}")

    def replicate(self, r: int) -> "SeededSource":
        """Independent copy number ``r`` (label namespacing)."""
        return SeededSource(self.seed, f"{self.label}#{r}")


def philox4x32(counter: Sequence[int], key: Sequence[int]) -> tuple[int, int, int, int]:
    c0, c1, c2, c3 = counter
    k0, k1 = key
    for _ in range(_ROUNDS):
        p0 = _M0 * c0
        p1 = _M1 * c2
        c0, c1, c2, c3 = (
            ((p1 >> 32) ^ c1 ^ k0) & _MASK32,
            p1 & _MASK32,
            ((p0 >> 32) ^ c3 ^ k1) & _MASK32,
            p0 & _MASK32,
        )
        k0 = (k0 + _W0) & _MASK32
        k1 = (k1 + _W1) & _MASK32
    return c0, c1, c2, c3


def _message(key: bytes) -> list[int]:
    pad = (-len(key)) % 4
    words = list(struct.unpack(f">{(len(key) + pad) // 4}I", key + b"\0" * pad))
    msg = [len(key)] + words
    msg += [0] * ((-len(msg)) % 4)
    return msg


def prf64(src: SeededSource, key: bytes) -> int:
    state = src.iv
    k = src.philox_key
    msg = _message(key)
    for i in range(0, len(msg), 4):
        state = philox4x32(
            (state[0] ^ msg[i], state[1] ^ msg[i + 1], state[2] ^ msg[i + 2], state[3] ^ msg[i + 3]),
            k,
        )
    return (state[0] << 32) | state[1]


def uniform(src: SeededSource, key: bytes) -> float:
    return (prf64(src, key) >> 11) * _TO_UNIT


def uniform_at(src: SeededSource, a: MultiIndex) -> float:
    """The uniform ``U_a`` attached to multi-index ``a``."""
    return uniform(src, canonical_encoding(a))


def words_key(words: Sequence[int]) -> bytes:
    return struct.pack(f">{len(words)}I", *words)


# -- vectorised path ------------------------------------------------------


def _philox_np(c, key):
    c0, c1, c2, c3 = c
    k0, k1 = key
    m0, m1 = np.uint64(_M0), np.uint64(_M1)
    mask, s32 = np.uint64(_MASK32), np.uint64(32)
    for _ in range(_ROUNDS):
        p0 = c0 * m0
        p1 = c2 * m1
        c0, c1, c2, c3 = (
            ((p1 >> s32) ^ c1 ^ np.uint64(k0)),
            p1 & mask,
            ((p0 >> s32) ^ c3 ^ np.uint64(k1)),
            p0 & mask,
        )
        k0 = (k0 + _W0) & _MASK32
        k1 = (k1 + _W1) & _MASK32
    return c0, c1, c2, c3


def prf64_words(seed: int, ivs, words) -> np.ndarray:
    """Vectorised ``prf64`` for key byte strings given as 32-bit words.

    ``ivs`` has shape ``(..., 4)`` (see :func:`ivs_for`) and ``words`` shape
    ``(..., L)``; leading axes broadcast.  Equal to ``prf64(src, words_key(w))``.
    """
    ivs = np.asarray(ivs, dtype=np.uint64)
    words = np.asarray(words, dtype=np.uint64)
    if ivs.shape[-1] != 4:
        raise ValueError("ivs must have a trailing axis of length 4")
    n = words.shape[-1]
    total = 1 + n
    total += (-total) % 4
    lead = np.broadcast_shapes(ivs.shape[:-1], words.shape[:-1])
    msg = np.zeros(words.shape[:-1] + (total,), dtype=np.uint64)
    msg[..., 0] = 4 * n
    msg[..., 1 : 1 + n] = words
    state = [np.broadcast_to(ivs[..., i], lead) for i in range(4)]
    key = (seed & _MASK32, seed >> 32)
    for b in range(0, total, 4):
        state = _philox_np([state[i] ^ msg[..., b + i] for i in range(4)], key)
    return (state[0] << np.uint64(32)) | state[1]


def uniform_words(seed: int, ivs, words) -> np.ndarray:
    w = prf64_words(seed, ivs, words)
    return (w >> np.uint64(11)).astype(np.float64) * _TO_UNIT


def ivs_for(sources: Sequence[SeededSource]) -> np.ndarray:
    return np.array([s.iv for s in sources], dtype=np.uint64).reshape(len(sources), 4)


def replicate_ivs(src: SeededSource, n: int, start: int = 0) -> np.ndarray:
    """IVs of ``src.replicate(r)`` for ``r`` in ``range(start, start + n)``."""
    out = np.empty((n, 4), dtype=np.uint64)
    label = src.label
    for i in range(n):
        digest = hashlib.blake2b(f"{label}#{start + i}".encode("utf-8"), digest_size=16).digest()
        out[i] = struct.unpack(">4I", digest)
    return out


def index_words(indices: Sequence[MultiIndex]) -> np.ndarray:
    """Stack encodings of equal-length indices into a ``(K, L)`` word array."""
    rows = [encoding_words(a) for a in indices]
    if len({len(r) for r in rows}) > 1:
        raise ValueError("index_words needs indices with equal-size domains")
    return np.array(rows, dtype=np.uint64).reshape(len(rows), -1)


# -- finite permutations --------------------------------------------------


@dataclass(frozen=True, eq=False)
class FinitePermutation:
    """Permutation of the positive integers moving only values ``<= support``.

    ``image[i - 1]`` is where ``i`` goes.  Equality is by action, so trailing
    fixed points do not matter.
    """

    image: tuple[int, ...]

    def __post_init__(self):
        k = len(self.image)
        if sorted(self.image) != list(range(1, k + 1)):
            raise ValueError(f"{self.image} is not a permutation of 1..{k}")

    @classmethod
    def identity(cls, k: int = 0) -> "FinitePermutation":
        return cls(tuple(range(1, k + 1)))

    @classmethod
    def from_mapping(cls, mapping: dict[int, int], k: int | None = None) -> "FinitePermutation":
        k = max([0, *mapping, *mapping.values()]) if k is None else k
        image = list(range(1, k + 1))
        for s, t in mapping.items():
            image[s - 1] = t
        return cls(tuple(image))

    @property
    def support(self) -> int:
        return len(self.image)

    def _trimmed(self) -> tuple[int, ...]:
        img = self.image
        k = len(img)
        while k and img[k - 1] == k:
            k -= 1
        return img[:k]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FinitePermutation):
            return NotImplemented
        return self._trimmed() == other._trimmed()

    def __hash__(self) -> int:
        return hash(self._trimmed())

    def __call__(self, x: int) -> int:
        return self.image[x - 1] if x <= len(self.image) else x

    def is_identity(self) -> bool:
        return not self._trimmed()

    def inverse(self) -> "FinitePermutation":
        inv = [0] * len(self.image)
        for i, t in enumerate(self.image, start=1):
            inv[t - 1] = i
        return FinitePermutation(tuple(inv))

    def then(self, other: "FinitePermutation") -> "FinitePermutation":
        """``other`` after ``self``: ``x -> other(self(x))``."""
        k = max(self.support, other.support)
        return FinitePermutation(tuple(other(self(x)) for x in range(1, k + 1)))

    def __repr__(self) -> str:
        return f"FinitePermutation({list(self.image)})"


def random_finite_permutation(src: SeededSource, key: bytes, k: int) -> FinitePermutation:
    """Fisher-Yates shuffle of ``1..k`` driven by the keyed PRF."""
    if k < 1:
        raise ValueError("permutation support must be at least 1")
    items = list(range(1, k + 1))
    for i in range(k - 1, 0, -1):
        w = prf64(src, key + struct.pack(">I", i))
        j = (w * (i + 1)) >> 64
        items[i], items[j] = items[j], items[i]
    return FinitePermutation(tuple(items))


def random_permutations_np(seed: int, iv, n_perms: int, size: int) -> np.ndarray:
    """``n_perms`` random orderings of ``range(size)`` (argsort of keyed uniforms)."""
    grid = np.stack(
        np.meshgrid(np.arange(n_perms, dtype=np.uint64), np.arange(size, dtype=np.uint64), indexing="ij"),
        axis=-1,
    )
    w = prf64_words(seed, np.asarray(iv, dtype=np.uint64), grid)
    return np.argsort(w, axis=1, kind="stable")
