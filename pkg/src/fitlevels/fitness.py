"""Benchmark functions: OneMax, LeadingOnes, long k-paths and lookup tables."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bitstring import BitString

ONEMAX, LEADINGONES, TABLE, LONGPATH = 0, 1, 2, 3

DEFAULT_PATH_CAP = 2**22
MAX_TABLE_BITS = 20


def onemax(x: BitString) -> int:
    """Number of one-bits."""
    return x.count_ones()


def leadingones(x: BitString) -> int:
    """Length of the longest all-ones prefix."""
    zeros = ~x.value & ((1 << x.n) - 1)
    if zeros == 0:
        return x.n
    return x.n - zeros.bit_length()


def long_path_length(n: int, k: int) -> int:
    """Number of points on the long k-path over ``n`` bits."""
    _check_path_params(n, k)
    return k * 2 ** (n // k) - k + 1


def _check_path_params(n, k):
    if k < 1 or n < 1:
        raise ValueError("need n >= 1 and k >= 1")
    if n % k:
        raise ValueError(f"k={k} does not divide n={n}")


@dataclass(frozen=True)
class LongKPath:
    """A long k-path: its points in order plus an index from point to position."""

    n: int
    k: int
    points: tuple
    index: dict = field(repr=False, compare=False)

    @property
    def m(self) -> int:
        """Index of the last point (the path has ``m + 1`` points)."""
        return len(self.points) - 1

    def __len__(self):
        return len(self.points)

    def position(self, x: BitString) -> int:
        """Position of ``x`` on the path, ``-1`` when off the path."""
        return self.index.get(x.value, -1)

    def point(self, i: int) -> BitString:
        return BitString(self.points[i], self.n)

    def as_strings(self):
        return [format(v, f"0{self.n}b") for v in self.points]


def build_long_k_path(n: int, k: int, cap: int = DEFAULT_PATH_CAP) -> LongKPath:
    """Construct the long k-path over ``n`` bits.

    The path over ``n`` bits is the ``(n-k)``-bit path prefixed with ``0^k``,
    then a bridge of ``k - 1`` points turning the prefix into ``1^k`` one bit
    at a time (rightmost first) while the suffix stays at the last sub-path
    point, then the reversed sub-path prefixed with ``1^k``.

    Raises
    ------
    ValueError
        If ``k`` does not divide ``n`` or the path would exceed ``cap`` points.
    """
    length = long_path_length(n, k)
    if length > cap:
        raise ValueError(f"long {k}-path on {n} bits has {length} points, above cap {cap}")
    path = [0]
    width = 0
    while width < n:
        last = path[-1]
        lead = [((1 << j) - 1) << width for j in range(k + 1)]
        bridge = [lead[j] | last for j in range(1, k)]
        ones = lead[k]
        path = path + bridge + [ones | v for v in reversed(path)]
        width += k
    points = tuple(path)
    return LongKPath(n, k, points, {v: i for i, v in enumerate(points)})


def path_invariants(path: LongKPath) -> dict:
    """Check the five structural invariants of a long k-path.

    Returns a mapping from invariant name to a boolean.
    """
    pts = np.array(path.points, dtype=object if path.n > 63 else np.int64)
    k = path.k
    m1 = len(path.points)

    def dist(a, b):
        return _popcount_array(np.bitwise_xor(a, b)) if pts.dtype != object else \
            np.array([bin(int(u) ^ int(v)).count("1") for u, v in zip(a, b)])

    checks = {
        "starts_at_zero": path.points[0] == 0,
        "neighbours_differ_in_one_bit": bool(np.all(dist(pts[:-1], pts[1:]) == 1)) if m1 > 1 else True,
        "near_successors_at_distance_j": True,
        "far_successors_at_distance_at_least_k": True,
        "points_distinct": len(set(path.points)) == m1,
    }
    for j in range(1, min(k, m1 - 1) + 1):
        if not np.all(dist(pts[:-j], pts[j:]) == j):
            checks["near_successors_at_distance_j"] = False
            break
    if k > 1:
        # distance >= 1 for k = 1 is the same as distinctness
        for j in range(k + 1, m1):
            if not np.all(dist(pts[:-j], pts[j:]) >= k):
                checks["far_successors_at_distance_at_least_k"] = False
                break
    else:
        checks["far_successors_at_distance_at_least_k"] = checks["points_distinct"]
    return checks


def _popcount_array(v):
    v = v.astype(np.uint64)
    return np.bitwise_count(v) if hasattr(np, "bitwise_count") else \
        np.array([bin(int(a)).count("1") for a in v])


def longpath_fitness(path: LongKPath, x: BitString) -> int:
    """``n + 1 + i`` for the i-th path point, ``n - onemax(x)`` off the path."""
    if x.n != path.n:
        raise ValueError("length mismatch")
    i = path.position(x)
    if i >= 0:
        return path.n + 1 + i
    return path.n - onemax(x)


@dataclass
class FitnessOracle:
    """Deterministic objective over ``{0,1}^n`` with a known optimal value.

    The numba engines consume the ``kind`` code and the lookup arrays; Python
    callers use :meth:`evaluate` and :meth:`is_optimal`.
    """

    name: str
    n: int
    kind: int
    optimum_value: float
    table: np.ndarray = field(default_factory=lambda: np.zeros(1), repr=False)
    levels: np.ndarray = field(default_factory=lambda: np.zeros(1, dtype=np.int64), repr=False)
    path: LongKPath | None = field(default=None, repr=False)
    path_keys: np.ndarray = field(default_factory=lambda: np.zeros(1, dtype=np.int64), repr=False)
    path_pos: np.ndarray = field(default_factory=lambda: np.zeros(1, dtype=np.int64), repr=False)

    def evaluate(self, x: BitString) -> float:
        if x.n != self.n:
            raise ValueError(f"oracle expects {self.n} bits, got {x.n}")
        if self.kind == ONEMAX:
            return onemax(x)
        if self.kind == LEADINGONES:
            return leadingones(x)
        if self.kind == LONGPATH:
            return longpath_fitness(self.path, x)
        return float(self.table[x.value])

    __call__ = evaluate

    def level(self, x: BitString) -> int:
        """Index of ``x``'s level in the canonical partition."""
        if self.kind == TABLE:
            return int(self.levels[x.value])
        return int(self.evaluate(x))

    def is_optimal(self, x: BitString) -> bool:
        return self.evaluate(x) >= self.optimum_value

    def optima(self):
        """All optimal points (enumerates the space; n <= 20)."""
        if self.n > MAX_TABLE_BITS:
            raise ValueError("enumeration limited to n <= 20")
        return [BitString(v, self.n) for v in range(2**self.n)
                if self.is_optimal(BitString(v, self.n))]

    def has_unique_optimum(self) -> bool:
        return len(self.optima()) == 1


def _table_oracle(name, n, values, optimum=None):
    values = np.asarray(values, dtype=np.float64)
    if n > MAX_TABLE_BITS:
        raise ValueError(f"custom tables are limited to n <= {MAX_TABLE_BITS}")
    if values.shape != (2**n,):
        raise ValueError(f"table must cover all 2^{n} points")
    best = values.max()
    if optimum is not None:
        declared = {BitString.from_str(s).value for s in ([optimum] if isinstance(optimum, str) else optimum)}
        actual = set(np.flatnonzero(values == best).tolist())
        if declared != actual:
            raise ValueError("declared optimum does not match the table's maximisers")
    distinct = np.unique(values)
    levels = np.searchsorted(distinct, values).astype(np.int64)
    return FitnessOracle(name, n, TABLE, float(best), table=values, levels=levels)


def make_oracle(kind: str, n: int, *, k: int | None = None, values=None, optimum=None,
                path_cap: int = DEFAULT_PATH_CAP) -> FitnessOracle:
    """Build a fitness oracle.

    Parameters
    ----------
    kind : {"onemax", "leadingones", "longpath", "table", "trap"}
        ``longpath`` needs ``k``; ``table`` needs ``values``, either a
        sequence indexed by packed value or a mapping from 0/1 strings to
        numbers covering every point. ``trap`` is OneMax with the optimum
        moved to ``0^n``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if kind == "onemax":
        return FitnessOracle("onemax", n, ONEMAX, float(n))
    if kind == "leadingones":
        return FitnessOracle("leadingones", n, LEADINGONES, float(n))
    if kind == "longpath":
        if k is None:
            raise ValueError("longpath oracle needs k")
        path = build_long_k_path(n, k, cap=path_cap)
        order = np.argsort(np.array(path.points, dtype=np.int64)) if n <= 63 else None
        keys = np.array(path.points, dtype=np.int64)[order] if order is not None else np.zeros(1, np.int64)
        pos = order.astype(np.int64) if order is not None else np.zeros(1, np.int64)
        return FitnessOracle(f"longpath{k}", n, LONGPATH, float(n + 1 + path.m),
                             path=path, path_keys=keys, path_pos=pos)
    if kind == "trap":
        return _table_oracle("trap", n, trap_table(n))
    if kind == "table":
        if values is None:
            raise ValueError("table oracle needs values")
        if isinstance(values, dict):
            arr = np.full(2**n, np.nan)
            for s, v in values.items():
                b = BitString.from_str(s)
                if b.n != n:
                    raise ValueError(f"entry {s!r} has wrong length")
                arr[b.value] = v
            if np.isnan(arr).any():
                raise ValueError(f"table must cover all 2^{n} points")
            values = arr
        return _table_oracle("table", n, values, optimum)
    raise ValueError(f"unknown oracle kind {kind!r}")


def trap_table(n: int) -> np.ndarray:
    """OneMax values everywhere except a unique maximum ``n + 1`` at ``0^n``."""
    ones = np.array([bin(v).count("1") for v in range(2**n)], dtype=np.float64)
    ones[0] = n + 1
    return ones


def load_table(path) -> FitnessOracle:
    """Load ``{"n": int, "values": {bitstring: number}, "optimum"?: ...}``."""
    doc = json.loads(Path(path).read_text())
    return make_oracle("table", int(doc["n"]), values=doc["values"], optimum=doc.get("optimum"))
