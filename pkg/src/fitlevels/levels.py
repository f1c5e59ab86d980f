"""Fitness-level bounds: classic, refined and adaptation-time upper bounds,
crude, viscosity and capped lower bounds.

Levels are indexed ``0 .. m-1`` with ``m-1`` the target level. ``rate[i]`` is
read as a lower bound ``s_i`` on the probability of leaving level ``i``
upwards for upper bounds, and as an upper bound ``u_i`` for lower bounds.
``gamma[i, j]`` is the share of that leaving probability landing on level
``j > i``; ``chi`` is the viscosity.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

TOL = 1e-12
_DENSE_CHECK_LIMIT = 20000


class PartitionError(ValueError):
    """A level partition violates its invariants."""


@njit(cache=True)
def _suffix_sums(values):
    """Compensated suffix sums ``out[i] = sum(values[i:])``; ``out[-1] = 0``."""
    n = values.shape[0]
    out = np.zeros(n + 1)
    s = 0.0
    c = 0.0
    for i in range(n - 1, -1, -1):
        v = values[i]
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
        out[i] = s + c
    return out


def _geom_sum(r, a, b):
    """``sum(r**l for l in a..b)``, elementwise; zero when ``b < a``."""
    r = np.asarray(r, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    count = b - a + 1
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        logr = np.log(r)
        head = np.exp(a * logr)
        body = np.where(r == 1.0, count, np.expm1(count * logr) / (r - 1.0))
        out = np.where(r == 1.0, count, head * body)
        out = np.where(r == 0.0, np.where(a == 0, 1.0, 0.0), out)
    return np.where(count > 0, out, 0.0)


class Gamma:
    """Row-stochastic upper-triangular share matrix over ``m`` levels.

    Subclasses provide ``entries(i, js)`` and ``tails(i, js)`` (the sum of a
    row from ``j`` to the top); the generic checks work row by row, so only
    generator-backed rows are ever materialised.
    """

    kind = "abstract"

    def __init__(self, m: int):
        if m < 2:
            raise PartitionError("need at least two levels")
        self.m = m

    @property
    def top(self) -> int:
        return self.m - 1

    def entries(self, i, js):
        raise NotImplementedError

    def tails(self, i, js):
        raise NotImplementedError

    def entry(self, i: int, j: int) -> float:
        return float(self.entries(i, np.array([j]))[0])

    def tail(self, i: int, j: int) -> float:
        return float(self.tails(i, np.array([j]))[0])

    def row(self, i: int) -> np.ndarray:
        """``gamma[i, i+1 .. m-1]``."""
        return self.entries(i, np.arange(i + 1, self.m))

    def row_sums(self) -> np.ndarray:
        return np.array([self.tail(i, i + 1) for i in range(self.m - 1)])

    def band_sum(self, i: int, d: int) -> float:
        js = np.arange(i + 1, min(i + d, self.top) + 1)
        return float(np.sum(self.entries(i, js)))

    def to_matrix(self) -> np.ndarray:
        g = np.zeros((self.m, self.m))
        for i in range(self.m - 1):
            g[i, i + 1:] = self.row(i)
        return g

    def _pairs(self, band, upto):
        """Yield ``(i, js)`` over the checked index pairs."""
        if band is None and self.m > _DENSE_CHECK_LIMIT:
            raise PartitionError(f"unbanded check on {self.m} levels is too large; pass a band")
        for i in range(self.m - 1):
            hi = upto if band is None else min(upto, i + band)
            if hi > i:
                yield i, np.arange(i + 1, hi + 1)

    def lower_margin(self, chi: float, band: int | None = None) -> float:
        """Worst ``gamma[i,j] - chi * tail(i,j)`` over checked pairs."""
        worst = np.inf
        for i, js in self._pairs(band, self.top):
            worst = min(worst, float(np.min(self.entries(i, js) - chi * self.tails(i, js))))
        return worst

    def upper_margin(self, chi: float) -> float:
        """Worst ``chi * tail(i,j) - gamma[i,j]`` over ``i < j < m-1``.

        The target level is excluded: there the tail equals the entry and
        the condition could only hold for ``chi = 1``; the refined upper
        bound only ever uses levels below the target.
        """
        worst = np.inf
        for i, js in self._pairs(None, self.top - 1):
            worst = min(worst, float(np.min(chi * self.tails(i, js) - self.entries(i, js))))
        return worst

    def viscosity_ratios(self, band=None, upto=None):
        upto = self.top if upto is None else upto
        for i, js in self._pairs(band, upto):
            g = self.entries(i, js)
            t = self.tails(i, js)
            keep = t > 0
            yield np.where(g[keep] > 0, g[keep] / np.where(keep, t, 1.0)[keep], 0.0)

    def to_dict(self) -> dict:
        raise NotImplementedError


class DenseGamma(Gamma):
    kind = "dense"

    def __init__(self, matrix):
        g = np.array(matrix, dtype=np.float64)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise PartitionError("gamma matrix must be square")
        super().__init__(g.shape[0])
        if np.any(g < 0):
            raise PartitionError("gamma entries must be non-negative")
        if np.any(np.tril(g) != 0):
            raise PartitionError("gamma must be strictly upper triangular")
        self.matrix = g
        self._tails = np.flip(np.cumsum(np.flip(g, axis=1), axis=1), axis=1)

    def entries(self, i, js):
        return self.matrix[i, js]

    def tails(self, i, js):
        return self._tails[i, js]

    def to_matrix(self):
        return self.matrix.copy()

    def to_dict(self):
        return {"kind": "dense", "matrix": self.matrix.tolist()}


class LeadingOnesGamma(Gamma):
    """``gamma[i,k] = 2**(i-k)`` below the target, ``2**(i-k+1)`` at it."""

    kind = "lo"

    def entries(self, i, js):
        js = np.asarray(js)
        return np.ldexp(1.0, (i - js + (js == self.top)).astype(np.int64))

    def tails(self, i, js):
        js = np.asarray(js)
        return np.ldexp(1.0, (i - js + 1).astype(np.int64))

    def to_dict(self):
        return {"kind": "lo", "m": self.m}


class GeometricGamma(Gamma):
    """Row ``i`` proportional to ``ratio_i ** (j - i - 1)`` for ``j > i``.

    ``ratio`` is a scalar or one value per non-target level.
    """

    kind = "geometric"

    def __init__(self, m: int, ratio):
        super().__init__(m)
        r = np.asarray(ratio, dtype=np.float64)
        if r.ndim == 0:
            r = np.full(m - 1, float(r))
        if r.shape != (m - 1,) or np.any(r < 0) or not np.all(np.isfinite(r)):
            raise PartitionError("geometric ratios must be finite, non-negative, one per row")
        self.ratio = r
        span = self.top - np.arange(m - 1)
        self._norm = _geom_sum(r, 0, span - 1)

    def entries(self, i, js):
        js = np.asarray(js, dtype=np.float64)
        return _geom_sum(self.ratio[i], js - i - 1, js - i - 1) / self._norm[i]

    def tails(self, i, js):
        js = np.asarray(js, dtype=np.float64)
        return _geom_sum(self.ratio[i], js - i - 1, self.top - i - 1) / self._norm[i]

    def row_sums(self):
        return np.ones(self.m - 1)

    def band_sum(self, i, d):
        hi = min(d, self.top - i)
        return float(_geom_sum(self.ratio[i], 0, hi - 1) / self._norm[i])

    def lower_margin(self, chi, band=None):
        if band is None:
            return super().lower_margin(chi, band)
        # vectorised over all rows for the banded case
        i = np.arange(self.m - 1, dtype=np.float64)[:, None]
        off = np.arange(1, band + 1, dtype=np.float64)[None, :]
        span = self.top - i
        r = self.ratio[:, None]
        valid = off <= span
        g = _geom_sum(r, off - 1, off - 1)
        t = _geom_sum(r, off - 1, span - 1)
        margin = (g - chi * t) / self._norm[:, None]
        return float(np.min(np.where(valid, margin, np.inf)))

    def to_dict(self):
        r = self.ratio
        return {"kind": "geometric", "m": self.m,
                "ratio": float(r[0]) if np.all(r == r[0]) else r.tolist()}


class BandedGamma(Gamma):
    """Explicit shares for the next ``len(rows[i])`` levels; the remainder of
    each row sits on the target level."""

    kind = "banded"

    def __init__(self, m: int, rows):
        super().__init__(m)
        if len(rows) != m - 1:
            raise PartitionError("banded gamma needs one row per non-target level")
        self.rows = []
        for i, row in enumerate(rows):
            row = np.asarray(row, dtype=np.float64)[: self.top - i]
            if np.any(row < 0) or row.sum() > 1 + TOL:
                raise PartitionError(f"band row {i} must be non-negative with sum <= 1")
            self.rows.append(row)

    def _full_row(self, i):
        full = np.zeros(self.m)
        band = self.rows[i]
        full[i + 1: i + 1 + band.size] = band
        full[self.top] += max(0.0, 1.0 - band.sum())
        return full

    def entries(self, i, js):
        return self._full_row(i)[np.asarray(js)]

    def tails(self, i, js):
        full = self._full_row(i)
        suffix = np.flip(np.cumsum(np.flip(full)))
        return suffix[np.asarray(js)]

    def to_dict(self):
        return {"kind": "banded", "m": self.m, "rows": [r.tolist() for r in self.rows]}


def gamma_from_dict(d: dict, m: int | None = None) -> Gamma:
    kind = d.get("kind")
    if kind == "dense":
        return DenseGamma(d["matrix"])
    m = int(d.get("m", m))
    if kind == "lo":
        return LeadingOnesGamma(m)
    if kind == "geometric":
        return GeometricGamma(m, d["ratio"])
    if kind == "banded":
        return BandedGamma(m, d["rows"])
    raise PartitionError(f"unknown gamma kind {kind!r}")


def max_viscosity(gamma: Gamma, band: int | None = None) -> float:
    """Largest ``chi`` with ``gamma[i,j] >= chi * sum_{k>=j} gamma[i,k]`` for all
    checked ``i < j`` (``j <= i + band`` when banded)."""
    best = 1.0
    for ratios in gamma.viscosity_ratios(band):
        if ratios.size:
            best = min(best, float(ratios.min()))
    return min(1.0, max(0.0, best))


def min_refined_viscosity(gamma: Gamma) -> float:
    """Smallest ``chi`` with ``gamma[i,j] <= chi * tail(i,j)`` for ``i < j < m-1``;
    1 when no pair is constrained."""
    worst = 0.0
    seen = False
    for ratios in gamma.viscosity_ratios(upto=gamma.top - 1):
        if ratios.size:
            seen = True
            worst = max(worst, float(ratios.max()))
    return min(1.0, worst) if seen else 1.0


def expected_levels_gained(chi: float) -> float:
    """Upper bound ``1/chi`` on the expected number of levels gained per improvement."""
    if not 0.0 < chi <= 1.0:
        raise ValueError("chi must lie in (0, 1]")
    return 1.0 / chi


@dataclass
class LevelPartition:
    """Fitness-level partition with start distribution, rates, shares and viscosity.

    ``start`` has one entry per level; mass on the target level contributes
    no time. ``rate`` and ``adaptation`` have one entry per non-target level.
    ``band``/``alpha`` optionally record the cut-off used by the capped
    lower bound.
    """

    start: np.ndarray
    rate: np.ndarray
    gamma: Gamma | None = None
    chi: float = 0.0
    adaptation: np.ndarray | None = None
    band: int | None = None
    alpha: float | None = None
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.start = np.asarray(self.start, dtype=np.float64)
        self.rate = np.asarray(self.rate, dtype=np.float64)
        m = self.start.size
        if m < 2:
            raise PartitionError("need at least two levels")
        if np.any(self.start < 0) or abs(math.fsum(self.start) - 1.0) > TOL:
            raise PartitionError("start distribution must be non-negative and sum to 1")
        if self.rate.shape != (m - 1,):
            raise PartitionError(f"need {m - 1} rates for {m} levels")
        if not np.all(self.rate > 0) or not np.all(np.isfinite(self.rate)):
            raise PartitionError("every rate must be finite and strictly positive")
        if self.gamma is not None:
            if self.gamma.m != m:
                raise PartitionError("gamma has the wrong number of levels")
            if self.gamma.kind == "dense":
                sums = self.gamma.row_sums()
                if np.any(np.abs(sums - 1.0) > TOL):
                    raise PartitionError("every gamma row must sum to 1")
        if not 0.0 <= self.chi <= 1.0:
            raise PartitionError("chi must lie in [0, 1]")
        if self.adaptation is not None:
            self.adaptation = np.asarray(self.adaptation, dtype=np.float64)
            if self.adaptation.shape != (m - 1,) or np.any(self.adaptation < 0):
                raise PartitionError("adaptation times must be non-negative, one per non-target level")

    @property
    def m(self) -> int:
        return self.start.size

    def to_dict(self) -> dict:
        d = {"m": self.m, "start": self.start.tolist(), "rate": self.rate.tolist(),
             "gamma": self.gamma.to_dict() if self.gamma is not None else None,
             "chi": self.chi}
        if self.adaptation is not None:
            d["adaptation"] = self.adaptation.tolist()
        if self.band is not None:
            d["band"] = self.band
        if self.alpha is not None:
            d["alpha"] = self.alpha
        return d

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict())
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_dict(cls, d: dict) -> "LevelPartition":
        m = int(d["m"])
        gamma = gamma_from_dict(d["gamma"], m) if d.get("gamma") else None
        return cls(np.asarray(d["start"]), np.asarray(d["rate"]), gamma, float(d.get("chi", 0.0)),
                   d.get("adaptation"), d.get("band"), d.get("alpha"))

    @classmethod
    def from_json(cls, text_or_path) -> "LevelPartition":
        text = str(text_or_path)
        if not text.lstrip().startswith("{"):
            text = Path(text).read_text()
        return cls.from_dict(json.loads(text))


@dataclass
class Condition:
    name: str
    satisfied: bool
    margin: float


@dataclass
class BoundReport:
    """A bound value with the side conditions that license it.

    ``certified`` is false when any condition failed; the value is still
    reported so candidate partitions can be explored.
    """

    value: float
    kind: str
    conditions: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return all(c.satisfied for c in self.conditions)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "value": self.value, "certified": self.certified,
                "conditions": [{"name": c.name, "satisfied": c.satisfied, "margin": c.margin}
                               for c in self.conditions],
                **self.extras}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def to_table(self) -> str:
        rows = [("kind", self.kind), ("value", f"{self.value:.17g}"),
                ("certified", str(self.certified))]
        rows += [(k, f"{v:.17g}" if isinstance(v, float) else str(v)) for k, v in self.extras.items()]
        rows += [(f"condition {c.name}", f"{'ok' if c.satisfied else 'VIOLATED'} (margin {c.margin:.3g})")
                 for c in self.conditions]
        width = max(len(r[0]) for r in rows)
        return "\n".join(f"{a.ljust(width)}  {b}" for a, b in rows)


def _condition(name, margin):
    return Condition(name, bool(margin >= -TOL), float(margin))


def _weighted(start, terms):
    return math.fsum((start[: terms.size] * terms).tolist())


def _inverse_suffix(rate, extra=None):
    inv = 1.0 / rate
    if extra is not None:
        inv = inv + extra
    return inv, _suffix_sums(inv)


def upper_bound_classic(part: LevelPartition) -> BoundReport:
    """``sum_i P(start=i) sum_{j>=i} 1/s_j``; also reports the start-agnostic sum."""
    _, suf = _inverse_suffix(part.rate)
    value = _weighted(part.start, suf[:-1])
    return BoundReport(value, "upper-classic", [], {"start_agnostic": float(suf[0])})


def upper_bound_with_adaptation(part: LevelPartition) -> BoundReport:
    """Classic upper bound plus the expected adaptation time of every visited level."""
    if part.adaptation is None:
        raise ValueError("partition has no adaptation times")
    _, suf = _inverse_suffix(part.rate, part.adaptation)
    value = _weighted(part.start, suf[:-1])
    return BoundReport(value, "upper-adaptation", [], {"start_agnostic": float(suf[0])})


def lower_bound_crude(part: LevelPartition) -> BoundReport:
    """Expected time to leave the initial level: ``sum_i P(start=i) / u_i``."""
    value = _weighted(part.start, 1.0 / part.rate)
    return BoundReport(value, "lower-crude")


def _viscous_sum(part, chi, weights=None):
    inv, suf = _inverse_suffix(part.rate)
    complex_terms = inv + chi * suf[1:]
    simple_terms = chi * suf[:-1]
    if weights is not None:
        complex_terms = complex_terms * weights
        simple_terms = simple_terms * weights
    return _weighted(part.start, complex_terms), _weighted(part.start, simple_terms)


def lower_bound_viscosity(part: LevelPartition, chi: float | None = None) -> BoundReport:
    """Viscosity lower bound ``sum_i P(start=i) (1/u_i + chi sum_{j>i} 1/u_j)``.

    Verifies ``gamma[i,j] >= chi * sum_{k>=j} gamma[i,k]`` for all ``i < j``
    and reports the weaker form ``chi * sum_{j>=i} 1/u_j`` as ``simple``.
    """
    chi = part.chi if chi is None else chi
    if not 0.0 <= chi <= 1.0:
        raise ValueError("chi must lie in [0, 1]")
    conditions = []
    if chi > 0:
        if part.gamma is None:
            conditions.append(Condition("gamma_decay", False, -np.inf))
        else:
            conditions.append(_condition("gamma_decay", part.gamma.lower_margin(chi)))
    value, simple = _viscous_sum(part, chi)
    return BoundReport(value, "lower-viscosity", conditions, {"simple": simple, "chi": chi})


def refined_upper_bound(part: LevelPartition, chi: float | None = None) -> BoundReport:
    """Refined upper bound ``sum_i P(start=i) (1/s_i + chi sum_{j>i} 1/s_j)``.

    Checks ``gamma[i,j] <= chi * tail(i,j)`` below the target and the
    balance condition ``(1 - chi) s_j <= s_{j+1}``.
    """
    chi = part.chi if chi is None else chi
    if not 0.0 < chi <= 1.0:
        raise ValueError("the refined upper bound needs 0 < chi <= 1")
    conditions = []
    if chi < 1.0:
        if part.gamma is None:
            conditions.append(Condition("gamma_concentration", False, -np.inf))
        else:
            conditions.append(_condition("gamma_concentration", part.gamma.upper_margin(chi)))
        s = part.rate
        balance = float(np.min(s[1:] - (1.0 - chi) * s[:-1])) if s.size > 1 else np.inf
        conditions.append(_condition("rate_balance", balance))
    value, _ = _viscous_sum(part, chi)
    return BoundReport(value, "upper-refined", conditions, {"chi": chi})


def max_alpha(part: LevelPartition, d: int) -> float:
    """Largest ``alpha`` with ``alpha <= sum_{j=1..d} gamma[i,i+j]`` for all rows
    that can jump beyond the band."""
    g = part.gamma
    rows = range(0, max(0, part.m - 1 - d))
    vals = [g.band_sum(i, d) for i in rows]
    return min(1.0, min(vals)) if vals else 1.0


def lower_bound_capped(part: LevelPartition, d: int | None = None,
                       alpha: float | None = None, chi: float | None = None) -> BoundReport:
    """Lower bound considering only jumps of at most ``d`` levels.

    Every level's term is scaled by ``alpha ** (levels above it)``. The decay
    condition is checked only for ``i < j <= i + d``. Without ``alpha`` the
    largest admissible value is computed from the band rows.
    """
    d = part.band if d is None else d
    chi = part.chi if chi is None else chi
    if d is None or d < 1:
        raise ValueError("band width d must be >= 1")
    if d > part.m - 1:
        raise ValueError(f"band width {d} exceeds the {part.m - 1} possible jumps")
    if part.gamma is None:
        raise ValueError("capped bound needs gamma")
    if alpha is None:
        alpha = part.alpha if part.alpha is not None else max_alpha(part, d)
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    conditions = [_condition("gamma_decay_band", part.gamma.lower_margin(chi, band=d))]
    if part.m - 1 - d > 0:
        conditions.append(_condition("alpha_band_mass", max_alpha(part, d) - alpha))
    above = (part.m - 1) - np.arange(part.m - 1)
    weights = np.exp(above * math.log(alpha))
    value, simple = _viscous_sum(part, chi, weights)
    return BoundReport(value, "lower-capped", conditions,
                       {"simple": simple, "chi": chi, "alpha": alpha, "band": d})
