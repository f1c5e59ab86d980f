"""Bit strings, random streams and standard bit mutation.

A :class:`BitString` packs its bits into a Python ``int``. Bit 1 (the
leftmost character of the ASCII form, the first bit LeadingOnes reads) is
the most significant of the ``n`` bits, so ``int("0111", 2)`` is the packed
value of ``"0111"``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _rng


class InvalidRateError(ValueError):
    """Mutation probability outside the analysed class ``0 < p <= 1/2``."""


def check_rate(p: float) -> float:
    """Validate a mutation probability and return it as ``float``.

    The analysed algorithm class only admits ``0 < p <= 1/2``: ``p = 1/2``
    is random search, and larger rates favour offspring far from the parent.
    """
    p = float(p)
    if not (0.0 < p <= 0.5):
        raise InvalidRateError(
            f"mutation probability must satisfy 0 < p <= 1/2 (mutation-based EA class), got {p!r}"
        )
    return p


@dataclass(frozen=True)
class BitString:
    """Immutable fixed-length bit string.

    Parameters
    ----------
    value : int
        Packed bits, bit 1 stored as the most significant of ``n`` bits.
    n : int
        Length, at least 1.
    """

    value: int
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("bit strings need length n >= 1")
        if not 0 <= self.value < (1 << self.n):
            raise ValueError(f"value {self.value} does not fit in {self.n} bits")

    @classmethod
    def from_str(cls, s: str) -> "BitString":
        if not s or set(s) - {"0", "1"}:
            raise ValueError(f"not a 0/1 string: {s!r}")
        return cls(int(s, 2), len(s))

    @classmethod
    def from_bits(cls, bits) -> "BitString":
        bits = [int(b) for b in bits]
        if any(b not in (0, 1) for b in bits):
            raise ValueError("bits must be 0 or 1")
        return cls.from_str("".join(map(str, bits)))

    @classmethod
    def zeros(cls, n: int) -> "BitString":
        return cls(0, n)

    @classmethod
    def ones(cls, n: int) -> "BitString":
        return cls((1 << n) - 1, n)

    def __str__(self):
        return format(self.value, f"0{self.n}b")

    def __len__(self):
        return self.n

    def __getitem__(self, i: int) -> int:
        if not -self.n <= i < self.n:
            raise IndexError(i)
        i %= self.n
        return (self.value >> (self.n - 1 - i)) & 1

    def __iter__(self):
        return (self[i] for i in range(self.n))

    def to_array(self) -> np.ndarray:
        return np.fromiter(self, dtype=np.uint8, count=self.n)

    def count_ones(self) -> int:
        return bin(self.value).count("1")

    def flip(self, positions) -> "BitString":
        mask = 0
        for pos in positions:
            mask ^= 1 << (self.n - 1 - int(pos))
        return BitString(self.value ^ mask, self.n)


@dataclass
class RandomStream:
    """Reproducible stream identified by ``(seed, stream)``.

    Identical identities reproduce identical draws; distinct stream ids give
    independent sequences. A stream belongs to one execution context and must
    not be shared between concurrent runs.
    """

    seed: int
    stream: int = 0
    state: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not 0 <= self.seed < 2**64 or not 0 <= self.stream < 2**64:
            raise ValueError("seed and stream id must be 64-bit unsigned integers")
        self.state = np.zeros(4, dtype=np.uint64)
        _rng.seed_state(np.uint64(self.seed), np.uint64(self.stream), self.state)

    def random(self) -> float:
        return float(_rng.next_double(self.state))

    def integer(self, bound: int) -> int:
        return int(_rng.next_below(self.state, bound))

    def bits(self, n: int) -> int:
        """``n`` uniform bits packed into an int."""
        value, left = 0, n
        while left > 0:
            take = min(left, 63)
            value = (value << take) | int(_rng.random_bits(self.state, take))
            left -= take
        return value

    def spawn(self, stream: int) -> "RandomStream":
        return RandomStream(self.seed, stream)


def sample_uniform(n: int, rng: RandomStream) -> BitString:
    """Draw a uniform bit string of length ``n``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return BitString(rng.bits(n), n)


def mutate(x: BitString, p: float, rng: RandomStream) -> BitString:
    """Flip every bit of ``x`` independently with probability ``p``."""
    p = check_rate(p)
    buf = np.empty(x.n, dtype=np.int64)
    k = _rng.flip_positions(rng.state, x.n, math.log1p(-p), buf)
    return x.flip(buf[:k])


def hamming(x: BitString, y: BitString) -> int:
    """Number of positions in which ``x`` and ``y`` differ."""
    if x.n != y.n:
        raise ValueError(f"length mismatch: {x.n} != {y.n}")
    return bin(x.value ^ y.value).count("1")


def mutation_probability(x: BitString, y: BitString, p: float) -> float:
    """Exact probability that mutating ``x`` with rate ``p`` yields ``y``."""
    d = hamming(x, y)
    return p**d * (1.0 - p) ** (x.n - d)
