"""Exact expected hitting times of elitist (1+1)-type processes.

Two oracles: level chains, which only move upwards and are solved by
backward substitution, and the full state chain over all ``2^n`` strings for
tiny ``n``, solved densely.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg, stats

from .bitstring import BitString, check_rate
from .closed_forms import build_lo_levels
from .fitness import FitnessOracle, build_long_k_path
from .levels import LevelPartition

FULL_CHAIN_MAX_BITS = 12
ONEMAX_CHAIN_MAX_BITS = 10**4
PATH_CHAIN_MAX_POINTS = 5000
# row entries below this fraction of the row maximum are dropped when
# building OneMax rows; the lost mass is far below double rounding of the result
_TRIM = 1e-25


class InfiniteTimeError(ArithmeticError):
    """The target cannot be reached from some start state."""


@dataclass
class LevelChain:
    """Upward level process: ``P[i, j]`` for ``j > i`` is the probability of
    jumping from level ``i`` to ``j``; the remaining mass stays put. The last
    level absorbs."""

    P: np.ndarray
    start: np.ndarray

    def __post_init__(self):
        self.P = np.triu(np.asarray(self.P, dtype=np.float64), 1)
        self.start = np.asarray(self.start, dtype=np.float64)
        m = self.P.shape[0]
        if self.P.shape != (m, m) or self.start.shape != (m,):
            raise ValueError("P must be m x m and start must have m entries")
        if np.any(self.P < 0):
            raise ValueError("transition probabilities must be non-negative")
        leave = self.P.sum(axis=1)
        if np.any(leave > 1 + 1e-12):
            raise ValueError("a level leaves with probability above 1")
        if abs(self.start.sum() - 1.0) > 1e-12 or np.any(self.start < 0):
            raise ValueError("start must be a probability vector")

    @property
    def m(self) -> int:
        return self.P.shape[0]

    def to_dict(self) -> dict:
        return {"m": self.m, "P": self.P.tolist(), "start": self.start.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "LevelChain":
        return cls(np.asarray(d["P"]), np.asarray(d["start"]))


def level_times(chain: LevelChain) -> np.ndarray:
    """Expected remaining time from every level (zero at the top)."""
    P = chain.P
    m = chain.m
    E = np.zeros(m)
    for i in range(m - 2, -1, -1):
        row = P[i, i + 1:]
        leave = row.sum()
        if leave <= 0:
            if chain.start[: i + 1].sum() > 0 or np.any(P[:i, i] > 0):
                raise InfiniteTimeError(f"level {i} cannot be left")
            E[i] = np.inf
            continue
        E[i] = (1.0 + row @ E[i + 1:]) / leave
    return E


def hitting_time_levels(chain: LevelChain) -> float:
    """Expected number of steps until the top level, from the start distribution."""
    E = level_times(chain)
    mask = chain.start > 0
    return float(chain.start[mask] @ E[mask])


def dense_hitting_time(P: np.ndarray, start: np.ndarray, absorbing) -> float:
    """Generic expected absorption time by a dense linear solve.

    ``P`` is a full row-stochastic matrix (self-loops included).
    """
    P = np.asarray(P, dtype=np.float64)
    absorbing = np.asarray(absorbing, dtype=bool)
    trans = ~absorbing
    Q = P[np.ix_(trans, trans)]
    A = np.eye(Q.shape[0]) - Q
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", linalg.LinAlgWarning)
            lu = linalg.lu_factor(A, check_finite=True)
        if np.any(np.diag(lu[0]) == 0):
            raise InfiniteTimeError("absorption system is singular")
        E = linalg.lu_solve(lu, np.ones(Q.shape[0]))
    except (linalg.LinAlgError, ValueError) as exc:
        raise InfiniteTimeError("absorption system is singular") from exc
    if not np.all(np.isfinite(E)) or np.any(E < 0):
        raise InfiniteTimeError("absorption system is singular")
    full = np.zeros(P.shape[0])
    full[trans] = E
    return float(np.asarray(start) @ full)


def level_chain_from_partition(part: LevelPartition) -> LevelChain:
    """Chain with ``P[i, j] = u_i * gamma[i, j]`` (exact when the partition's
    rates and shares are exact)."""
    if part.gamma is None:
        raise ValueError("partition has no gamma")
    G = part.gamma.to_matrix()
    P = part.rate[:, None] * G[:-1]
    return LevelChain(np.vstack([P, np.zeros(part.m)]), part.start)


def lo_level_chain(n: int, p: float, mu: int = 1) -> LevelChain:
    """Exact LeadingOnes level chain of the (1+1)_mu EA."""
    return level_chain_from_partition(build_lo_levels(n, p, mu))


def _binom_pmf(trials, p):
    return stats.binom.pmf(np.arange(trials + 1), trials, p)


def onemax_transition_row(n: int, i: int, p: float) -> np.ndarray:
    """Distribution of the one-bit count after mutating a string with ``i`` ones."""
    gain = _binom_pmf(n - i, p)
    loss = _binom_pmf(i, p)
    for arr in (gain, loss):
        arr[arr < _TRIM * arr.max()] = 0.0
    gain = np.trim_zeros(gain, "b")
    loss = np.trim_zeros(loss, "b")
    conv = np.convolve(gain, loss[::-1])
    row = np.zeros(n + 1)
    lo = i - (loss.size - 1)
    row[lo: lo + conv.size] = conv
    return row


def onemax_start(n: int, mu: int = 1) -> np.ndarray:
    """Law of the best OneMax value among ``mu`` uniform strings."""
    cdf = stats.binom.cdf(np.arange(n + 1), n, 0.5) ** mu
    cdf[-1] = 1.0
    return np.diff(cdf, prepend=0.0)


def onemax_level_chain(n: int, p: float, mu: int = 1) -> LevelChain:
    """Exact level chain of the (1+1)_mu EA on OneMax, one level per one-bit count."""
    p = check_rate(p)
    if n > ONEMAX_CHAIN_MAX_BITS:
        raise ValueError(f"OneMax level chain limited to n <= {ONEMAX_CHAIN_MAX_BITS}")
    P = np.zeros((n + 1, n + 1))
    for i in range(n):
        row = onemax_transition_row(n, i, p)
        P[i, i + 1:] = row[i + 1:]
    return LevelChain(P, onemax_start(n, mu))


def longpath_level_chain(n: int, k: int, p: float) -> LevelChain:
    """Exact chain over long-path positions, started at the first point.

    From point ``i`` the process moves to a later point ``j`` with the
    probability ``p^d (1-p)^(n-d)`` of hitting it by mutation, ``d`` the
    Hamming distance; every other offspring is rejected.
    """
    p = check_rate(p)
    path = build_long_k_path(n, k, cap=PATH_CHAIN_MAX_POINTS)
    pts = np.array(path.points, dtype=np.uint64)
    d = np.bitwise_count(pts[:, None] ^ pts[None, :]).astype(np.float64)
    P = np.triu(np.exp(d * np.log(p) + (n - d) * np.log1p(-p)), 1)
    start = np.zeros(len(pts))
    start[0] = 1.0
    return LevelChain(P, start)


@dataclass
class FullChain:
    """Elitist (1+1) process on all ``2^n`` strings: offspring ``y`` of ``x``
    replaces it iff ``f(y) >= f(x)``. Optimal states absorb."""

    n: int
    p: float
    P: np.ndarray
    absorbing: np.ndarray

    def to_dict(self) -> dict:
        return {"n": self.n, "p": self.p, "P": self.P.tolist(),
                "absorbing": np.flatnonzero(self.absorbing).tolist()}


def full_chain(f: FitnessOracle, p: float, max_bits: int = FULL_CHAIN_MAX_BITS) -> FullChain:
    """Build the full state chain of the (1+1) EA on ``f``."""
    p = check_rate(p)
    n = f.n
    if n > max_bits:
        raise ValueError(f"full chain limited to n <= {max_bits}")
    states = np.arange(2**n, dtype=np.uint64)
    values = np.array([f.evaluate(BitString(int(v), n)) for v in states])
    d = np.bitwise_count(states[:, None] ^ states[None, :])
    mass = np.exp(np.arange(n + 1) * np.log(p) + (n - np.arange(n + 1)) * np.log1p(-p))
    P = mass[d]
    P[values[None, :] < values[:, None]] = 0.0
    np.fill_diagonal(P, 0.0)
    P[np.diag_indices_from(P)] = 1.0 - P.sum(axis=1)
    absorbing = values >= f.optimum_value
    P[absorbing] = 0.0
    P[absorbing, absorbing] = 1.0
    return FullChain(n, p, P, absorbing)


def _start_vector(chain: FullChain, start) -> np.ndarray:
    size = 2**chain.n
    if isinstance(start, str) and start == "uniform":
        return np.full(size, 1.0 / size)
    if isinstance(start, BitString):
        start = start.value
    elif isinstance(start, str):
        start = BitString.from_str(start).value
    vec = np.zeros(size)
    vec[int(start)] = 1.0
    return vec


def hitting_time_full(chain: FullChain, start="uniform") -> float:
    """Expected steps to an optimum from a uniform start or a fixed state."""
    return dense_hitting_time(chain.P, _start_vector(chain, start), chain.absorbing)


def absorption_mass(chain: FullChain) -> np.ndarray:
    """Probability of eventually being absorbed, per transient state."""
    trans = ~chain.absorbing
    Q = chain.P[np.ix_(trans, trans)]
    R = chain.P[np.ix_(trans, chain.absorbing)].sum(axis=1)
    return linalg.solve(np.eye(Q.shape[0]) - Q, R)


def result(method: str, n: int, p: float, value: float, **extra) -> dict:
    """Hitting-time record ``{method, n, p, value}``."""
    return {"method": method, "n": n, "p": p, "value": value, **extra}
