"""Probability trees over binary words and their interval partitions.

A depth-k tree assigns an emission probability p_w to every binary word w
of length < k.  Words of length k index the leaves left to right.  Each
leaf carries weight delta_w (product of p / 1-p along its path) and the
cumulative weights of the leaves form a partition 0 = z_0 < ... < z_m = 1
of the unit interval with m = 2^k.  The two views are interconvertible
and the conversion is exact in both directions up to float rounding.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping, Union

import numpy as np

__all__ = [
    "Word",
    "ProbabilityTree",
    "Partition",
    "tree_from_levels",
    "uniform_tree",
    "conti_tree",
    "CONTI_LEVEL_PROBS",
]

# Fixed per-level emission probabilities of the reference CONTI protocol
# (all nodes on a level share one value; depth 6).
CONTI_LEVEL_PROBS = (0.07, 0.2, 0.25, 0.33, 0.4, 0.5)

WordLike = Union["Word", str]


@dataclass(frozen=True)
class Word:
    """Binary word; the empty word is the tree root."""

    bits: str = ""

    def __post_init__(self):
        if self.bits.strip("01"):
            raise ValueError(f"word must contain only 0/1, got {self.bits!r}")

    @property
    def length(self) -> int:
        return len(self.bits)

    @property
    def value(self) -> int:
        # numeric rank of the word among same-length words, MSB first
        return int(self.bits, 2) if self.bits else 0

    def append(self, bit: int) -> "Word":
        if bit not in (0, 1):
            raise ValueError("bit must be 0 or 1")
        return Word(self.bits + str(bit))

    @classmethod
    def from_index(cls, length: int, value: int) -> "Word":
        if length < 0 or not 0 <= value < (1 << length):
            raise ValueError(f"no word of length {length} with value {value}")
        return cls(format(value, f"0{length}b") if length else "")

    def __str__(self) -> str:
        return self.bits or "(root)"


def _as_word(w: WordLike) -> Word:
    return w if isinstance(w, Word) else Word(w)


@dataclass(frozen=True)
class ProbabilityTree:
    """Complete binary tree of emission probabilities, depth >= 1.

    probs maps (length, value) to p_w for every word of length < depth;
    all probabilities must lie strictly inside (0, 1).
    """

    depth: int
    probs: Mapping[tuple[int, int], float]

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        expected = {(l, v) for l in range(self.depth) for v in range(1 << l)}
        got = set(self.probs)
        if got != expected:
            missing = sorted(expected - got)[:3]
            extra = sorted(got - expected)[:3]
            raise ValueError(
                f"tree of depth {self.depth} needs exactly the words of length "
                f"< {self.depth}; missing {missing}, unexpected {extra}"
            )
        for key, p in self.probs.items():
            if not 0.0 < p < 1.0:
                raise ValueError(f"p at {key} must be in (0, 1), got {p}")
        object.__setattr__(self, "probs", dict(self.probs))

    def p(self, w: WordLike) -> float:
        w = _as_word(w)
        if w.length >= self.depth:
            raise ValueError(
                f"word of length {w.length} has no emission probability in a "
                f"depth-{self.depth} tree"
            )
        return self.probs[(w.length, w.value)]

    def delta(self, w: WordLike) -> float:
        """Weight of w: product over proper prefixes v of p_v or (1 - p_v)."""
        w = _as_word(w)
        if w.length > self.depth:
            raise ValueError("word longer than tree depth")
        d = 1.0
        for i, bit in enumerate(w.bits):
            p = self.probs[(i, w.value >> (w.length - i))]
            d *= p if bit == "1" else 1.0 - p
        return d

    def y_cum(self, w: WordLike) -> float:
        """Sum of delta_v over words v of the same length with v < w."""
        w = _as_word(w)
        if w.length > self.depth:
            raise ValueError("word longer than tree depth")
        y = 0.0
        d = 1.0
        for i, bit in enumerate(w.bits):
            p = self.probs[(i, w.value >> (w.length - i))]
            if bit == "1":
                y += d * (1.0 - p)
                d *= p
            else:
                d *= 1.0 - p
        return y

    def words(self, length: int) -> Iterator[Word]:
        for v in range(1 << length):
            yield Word.from_index(length, v)

    def level_deltas(self, length: int) -> np.ndarray:
        """All delta_w of the given length, in word order."""
        if not 0 <= length <= self.depth:
            raise ValueError("length out of range")
        d = np.ones(1)
        for l in range(length):
            p = np.array([self.probs[(l, v)] for v in range(1 << l)])
            nxt = np.empty(1 << (l + 1))
            nxt[0::2] = d * (1.0 - p)
            nxt[1::2] = d * p
            d = nxt
        return d

    def to_partition(self) -> "Partition":
        leaf = self.level_deltas(self.depth)
        z = np.concatenate([[0.0], np.cumsum(leaf)])
        z[-1] = 1.0  # sum of leaf weights is 1 analytically; pin the endpoint
        return Partition(z)

    def to_json_dict(self) -> dict:
        p = {}
        for l in range(self.depth):
            for v in range(1 << l):
                p[Word.from_index(l, v).bits] = self.probs[(l, v)]
        return {"k": self.depth, "p": p}

    @classmethod
    def from_json_dict(cls, d: dict) -> "ProbabilityTree":
        k = int(d["k"])
        probs = {}
        for bits, p in d["p"].items():
            w = Word(bits)
            probs[(w.length, w.value)] = float(p)
        return cls(depth=k, probs=probs)


@dataclass(frozen=True)
class Partition:
    """Strictly increasing breakpoints 0 = z_0 < ... < z_m = 1."""

    points: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.points, dtype=np.float64).copy()
        if z.ndim != 1 or len(z) < 2:
            raise ValueError("partition needs at least the two endpoints")
        if z[0] != 0.0 or z[-1] != 1.0:
            raise ValueError("partition must start at 0 and end at 1")
        if not np.all(np.diff(z) > 0.0):
            raise ValueError("partition points must be strictly increasing")
        z.flags.writeable = False
        object.__setattr__(self, "points", z)

    @property
    def m(self) -> int:
        return len(self.points) - 1

    @property
    def depth(self) -> int:
        k = self.m.bit_length() - 1
        if (1 << k) != self.m:
            raise ValueError(f"m = {self.m} is not a power of two")
        return k

    def to_tree(self) -> ProbabilityTree:
        """Invert to_partition: p_w from the relative split of w's interval."""
        k = self.depth
        z = self.points
        probs = {}
        for l in range(k):
            s = self.m >> l  # leaves under one node at this level
            h = s >> 1
            for v in range(1 << l):
                a = v * s
                lo, mid, hi = z[a], z[a + h], z[a + s]
                probs[(l, v)] = (hi - mid) / (hi - lo)
        return ProbabilityTree(depth=k, probs=probs)

    def to_json_dict(self) -> dict:
        return {"z": [float(x) for x in self.points]}

    @classmethod
    def from_json_dict(cls, d: dict) -> "Partition":
        return cls(np.asarray(d["z"], dtype=np.float64))


def tree_from_levels(level_probs) -> ProbabilityTree:
    """Tree whose every level shares one emission probability."""
    k = len(level_probs)
    probs = {(l, v): float(level_probs[l]) for l in range(k) for v in range(1 << l)}
    return ProbabilityTree(depth=k, probs=probs)


def uniform_tree(k: int) -> ProbabilityTree:
    return tree_from_levels([0.5] * k)


def conti_tree() -> ProbabilityTree:
    return tree_from_levels(CONTI_LEVEL_PROBS)
