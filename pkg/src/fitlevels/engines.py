"""Mutation-based EAs: the (1+1) EA, the (1+1)_mu EA and the generic scheme.

All engines run inside one numba kernel. Individuals are packed into
``int64`` words, so the engines are limited to ``n <= 63``. Every run owns a
:class:`~fitlevels.bitstring.RandomStream`; batches derive stream ``r`` for
run ``r`` so results do not depend on scheduling.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit, prange

from . import _rng
from .bitstring import BitString, RandomStream, check_rate
from .fitness import TABLE, FitnessOracle

MAX_ENGINE_BITS = 63

ELITIST = "elitist"
ALL_HISTORY = "uniform-over-all-history"
CURRENT_BEST = "uniform-over-current-best"
TRUNCATION = "truncation"
POLICIES = {ELITIST: 0, ALL_HISTORY: 1, CURRENT_BEST: 2, TRUNCATION: 3}

_FOUND, _CENSORED, _OUT_OF_MEMORY = 0, 1, 2


class ResourceError(RuntimeError):
    """A run needed more history storage than its configured cap."""


@dataclass
class EAConfig:
    """Parameters of one EA run.

    ``count_init`` decides whether the ``mu`` initial evaluations count
    towards the optimisation time. Formula comparisons leave it off, since
    the closed forms exclude initialisation.
    """

    n: int
    p: float
    mu: int = 1
    policy: str = ELITIST
    max_evaluations: int = 10**9
    count_init: bool = False
    start: BitString | None = None
    history_cap: int = 10**7

    def __post_init__(self):
        self.p = check_rate(self.p)
        if not 1 <= self.n <= MAX_ENGINE_BITS:
            raise ValueError(f"engines support 1 <= n <= {MAX_ENGINE_BITS}, got {self.n}")
        if self.mu < 1:
            raise ValueError("mu must be >= 1")
        if self.max_evaluations < self.mu:
            raise ValueError("max_evaluations must be >= mu")
        if self.policy not in POLICIES:
            raise ValueError(f"unknown selection policy {self.policy!r}; choose from {sorted(POLICIES)}")
        if self.start is not None:
            if self.start.n != self.n:
                raise ValueError("start string has the wrong length")
            if self.mu != 1:
                raise ValueError("a forced start requires mu = 1")


@dataclass
class RunRecord:
    """Outcome of one run.

    ``evals`` is the evaluation index at which an optimum was first created
    (0 if found during uncounted initialisation), or the cap when
    ``censored``. ``trajectory`` lists ``(evaluation, level)`` for the best
    initial individual and every strict improvement of the best-so-far.
    """

    evals: int
    censored: bool
    trajectory: list = field(default_factory=list)
    seed: int = 0
    stream: int = 0

    def to_json(self) -> str:
        return json.dumps({"seed": self.seed, "stream": self.stream, "evals": self.evals,
                           "censored": self.censored,
                           "trajectory": [[int(t), int(l)] for t, l in self.trajectory]})

    @classmethod
    def from_json(cls, line: str) -> "RunRecord":
        d = json.loads(line)
        return cls(int(d["evals"]), bool(d["censored"]),
                   [tuple(e) for e in d["trajectory"]], int(d["seed"]), int(d.get("stream", 0)))


def write_records(records, path) -> None:
    """Write run records as JSON lines."""
    with open(path, "w") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")


def read_records(path) -> list:
    return [RunRecord.from_json(line) for line in Path(path).read_text().splitlines() if line.strip()]


@njit(cache=True)
def _popcount(x):
    x = x - ((x >> 1) & 0x5555555555555555)
    x = (x & 0x3333333333333333) + ((x >> 2) & 0x3333333333333333)
    x = (x + (x >> 4)) & 0x0F0F0F0F0F0F0F0F
    return (x * 0x0101010101010101) >> 56 & 0xFF


@njit(cache=True)
def _msb(y):
    # index of the highest set bit, y > 0
    r = 0
    if y >> 32:
        y >>= 32
        r += 32
    if y >> 16:
        y >>= 16
        r += 16
    if y >> 8:
        y >>= 8
        r += 8
    if y >> 4:
        y >>= 4
        r += 4
    if y >> 2:
        y >>= 2
        r += 2
    if y >> 1:
        r += 1
    return r


@njit(cache=True)
def _fitness(kind, n, x, table, keys, pos):
    if kind == 0:
        return np.float64(_popcount(x))
    if kind == 1:
        y = (~x) & ((np.int64(1) << n) - 1)
        if y == 0:
            return np.float64(n)
        return np.float64(n - 1 - _msb(y))
    if kind == 2:
        return table[x]
    i = np.searchsorted(keys, x)
    if i < keys.shape[0] and keys[i] == x:
        return np.float64(n + 1 + pos[i])
    return np.float64(n - _popcount(x))


@njit(cache=True)
def _level(kind, fx, x, levels):
    if kind == 2:
        return levels[x]
    return np.int64(fx)


@njit(cache=True)
def _evolve(kind, n, table, levels, keys, pos, opt, log1mp, mu, count_init, max_evals,
            policy, hist_cap, start, state, traj_t, traj_l):
    """One run; returns (evals, status, trajectory length)."""
    t = 0
    ntraj = 0
    cap = hist_cap if policy == 1 or policy == 2 else 1
    hx = np.empty(cap, dtype=np.int64)
    hsize = 0
    px = np.empty(mu, dtype=np.int64)
    pf = np.empty(mu, dtype=np.float64)
    cur_x = np.int64(0)
    cur_f = -np.inf
    best_f = -np.inf
    best_t = 0
    best_x = np.int64(0)

    for r in range(mu):
        x = start if start >= 0 else _rng.random_bits(state, n)
        fx = _fitness(kind, n, x, table, keys, pos)
        if count_init:
            t += 1
        if policy == 0:
            if r == 0 or fx > cur_f:
                cur_x = x
                cur_f = fx
        elif policy == 1:
            if hsize >= cap:
                return t, 2, ntraj
            hx[hsize] = x
            hsize += 1
        elif policy == 2:
            if fx > best_f:
                hsize = 0
            if fx >= best_f:
                if hsize >= cap:
                    return t, 2, ntraj
                hx[hsize] = x
                hsize += 1
        else:
            px[r] = x
            pf[r] = fx
        if fx > best_f:
            best_f = fx
            best_t = t
            best_x = x
        if fx >= opt:
            break

    traj_t[0] = best_t
    traj_l[0] = _level(kind, best_f, best_x, levels)
    ntraj = 1
    if best_f >= opt:
        return best_t, 0, ntraj

    while True:
        if t >= max_evals:
            return t, 1, ntraj
        if policy == 0:
            parent = cur_x
        elif policy == 3:
            parent = px[_rng.next_below(state, mu)]
        else:
            parent = hx[_rng.next_below(state, hsize)]
        y = _rng.mutate_word(state, parent, n, log1mp)
        fy = _fitness(kind, n, y, table, keys, pos)
        t += 1
        if policy == 0:
            if fy >= cur_f:
                cur_x = y
                cur_f = fy
        elif policy == 1:
            if hsize >= cap:
                return t, 2, ntraj
            hx[hsize] = y
            hsize += 1
        elif policy == 2:
            if fy > best_f:
                hsize = 0
            if fy >= best_f:
                if hsize >= cap:
                    return t, 2, ntraj
                hx[hsize] = y
                hsize += 1
        else:
            w = 0
            for j in range(1, mu):
                if pf[j] < pf[w]:
                    w = j
            if fy >= pf[w]:
                px[w] = y
                pf[w] = fy
        if fy > best_f:
            best_f = fy
            traj_t[ntraj] = t
            traj_l[ntraj] = _level(kind, fy, y, levels)
            ntraj += 1
            if fy >= opt:
                return t, 0, ntraj


@njit(parallel=True, cache=True)
def _evolve_batch(kind, n, table, levels, keys, pos, opt, log1mp, mu, count_init, max_evals,
                  policy, hist_cap, start, seed, streams, evals, status, traj_t, traj_l, ntraj,
                  record):
    width = traj_t.shape[1]
    for r in prange(streams.shape[0]):
        state = np.empty(4, dtype=np.uint64)
        _rng.seed_state(seed, streams[r], state)
        bt = np.empty(width, dtype=np.int64)
        bl = np.empty(width, dtype=np.int64)
        e, s, k = _evolve(kind, n, table, levels, keys, pos, opt, log1mp, mu, count_init,
                          max_evals, policy, hist_cap, start, state, bt, bl)
        evals[r] = e
        status[r] = s
        ntraj[r] = k
        if record:
            for j in range(k):
                traj_t[r, j] = bt[j]
                traj_l[r, j] = bl[j]


def _trajectory_width(f: FitnessOracle) -> int:
    if f.kind == TABLE:
        return int(f.levels.max()) + 2
    return int(f.optimum_value) + 2


def _kernel_args(f: FitnessOracle, cfg: EAConfig, policy: str):
    if f.n != cfg.n:
        raise ValueError(f"oracle has n={f.n}, config has n={cfg.n}")
    if cfg.n > MAX_ENGINE_BITS:
        raise ValueError(f"engines support n <= {MAX_ENGINE_BITS}")
    start = cfg.start.value if cfg.start is not None else -1
    cap = min(cfg.history_cap, cfg.max_evaluations + cfg.mu + 1)
    return (f.kind, f.n, f.table, f.levels, f.path_keys, f.path_pos, float(f.optimum_value),
            math.log1p(-cfg.p), cfg.mu, cfg.count_init, cfg.max_evaluations, POLICIES[policy],
            cap, np.int64(start))


def _single(f, cfg, rng, policy):
    width = _trajectory_width(f)
    tt = np.empty(width, dtype=np.int64)
    tl = np.empty(width, dtype=np.int64)
    evals, status, k = _evolve(*_kernel_args(f, cfg, policy), rng.state, tt, tl)
    if status == _OUT_OF_MEMORY:
        raise ResourceError(f"history exceeded cap of {cfg.history_cap} individuals")
    return RunRecord(int(evals), status == _CENSORED, list(zip(tt[:k].tolist(), tl[:k].tolist())),
                     rng.seed, rng.stream)


def run_one_plus_one(f: FitnessOracle, cfg: EAConfig, rng: RandomStream) -> RunRecord:
    """(1+1) EA: mutate the current point, keep the offspring if not worse."""
    if cfg.mu != 1:
        raise ValueError("the (1+1) EA uses mu = 1; use run_one_plus_one_mu")
    return _single(f, cfg, rng, ELITIST)


def run_one_plus_one_mu(f: FitnessOracle, cfg: EAConfig, rng: RandomStream) -> RunRecord:
    """(1+1)_mu EA: start from the first best of ``mu`` uniform points."""
    return _single(f, cfg, rng, ELITIST)


def run_generic(f: FitnessOracle, cfg: EAConfig, rng: RandomStream) -> RunRecord:
    """Generic mutation-based EA with the parent selection policy ``cfg.policy``.

    Policies only look at the time index and fitness values of the history:

    ``uniform-over-all-history``
        any point created so far, uniformly.
    ``uniform-over-current-best``
        uniformly among the created points of best fitness.
    ``truncation``
        a (mu+1) population; the offspring replaces the first worst member
        when it is not worse, parents are drawn uniformly from it.
    """
    if cfg.policy not in POLICIES:
        raise ValueError(f"unknown selection policy {cfg.policy!r}")
    return _single(f, cfg, rng, cfg.policy)


@dataclass
class BatchResult:
    """Arrays describing many independent runs of one configuration."""

    evals: np.ndarray
    censored: np.ndarray
    seed: int
    streams: np.ndarray
    trajectories: list | None = None

    def records(self) -> list:
        trajs = self.trajectories or [[] for _ in range(len(self.evals))]
        return [RunRecord(int(e), bool(c), list(tr), self.seed, int(s))
                for e, c, tr, s in zip(self.evals, self.censored, trajs, self.streams)]


def run_batch(f: FitnessOracle, cfg: EAConfig, runs: int, seed: int, *, first_stream: int = 0,
              record_trajectories: bool = False, policy: str | None = None) -> BatchResult:
    """Run ``runs`` independent runs; run ``r`` uses stream ``first_stream + r``.

    Identical to calling the single-run engines with
    ``RandomStream(seed, first_stream + r)`` for each ``r``.
    """
    policy = cfg.policy if policy is None else policy
    streams = np.arange(first_stream, first_stream + runs, dtype=np.uint64)
    width = _trajectory_width(f)
    evals = np.empty(runs, dtype=np.int64)
    status = np.empty(runs, dtype=np.int64)
    ntraj = np.empty(runs, dtype=np.int64)
    shape = (runs, width) if record_trajectories else (1, width)
    tt = np.zeros(shape, dtype=np.int64)
    tl = np.zeros(shape, dtype=np.int64)
    _evolve_batch(*_kernel_args(f, cfg, policy), np.uint64(seed), streams, evals, status,
                  tt, tl, ntraj, record_trajectories)
    if np.any(status == _OUT_OF_MEMORY):
        raise ResourceError(f"history exceeded cap of {cfg.history_cap} individuals")
    trajs = None
    if record_trajectories:
        trajs = [list(zip(tt[r, :k].tolist(), tl[r, :k].tolist())) for r, k in enumerate(ntraj)]
    return BatchResult(evals, status == _CENSORED, seed, streams, trajs)


def empirical_gamma(records, m: int, return_counts: bool = False):
    """Observed level-transition frequencies.

    Row ``i`` is the distribution of the level reached when level ``i`` was
    left, tallied over consecutive trajectory entries. Unobserved rows are
    zero.

    Parameters
    ----------
    records : iterable of RunRecord or of trajectories
    m : int
        Number of levels (indices ``0 .. m-1``).
    """
    counts = np.zeros((m, m), dtype=np.int64)
    seen = False
    for rec in records:
        traj = rec.trajectory if isinstance(rec, RunRecord) else rec
        seen = True
        for (_, a), (_, b) in zip(traj[:-1], traj[1:]):
            counts[a, b] += 1
    if not seen:
        raise ValueError("no records given")
    totals = counts.sum(axis=1, keepdims=True)
    freq = np.divide(counts, totals, out=np.zeros((m, m)), where=totals > 0)
    return (freq, counts) if return_counts else freq
