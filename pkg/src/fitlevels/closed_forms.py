"""Closed-form runtime expressions and the level constructions behind them.

All powers of ``1 - p`` are taken as ``exp(t * log1p(-p))`` so that formulas
stay finite well past the range where naive powers overflow. Lower bounds
that come out negative are returned as-is; :func:`evaluate` flags them as
non-informative instead of clamping.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from .bitstring import check_rate
from .fitness import DEFAULT_PATH_CAP, long_path_length
from .levels import GeometricGamma, LeadingOnesGamma, LevelPartition, _geom_sum

EXACT_HARMONIC_LIMIT = 10**7


def _pow1m(p, t):
    """``(1 - p) ** t`` in log space."""
    return np.exp(t * np.log1p(-p))


# ---------------------------------------------------------------- LeadingOnes

def lo_init_distribution(n: int, mu: int = 1) -> np.ndarray:
    """Law of the best LeadingOnes value among ``mu`` uniform strings.

    Returns ``probs`` with ``probs[i] = P(X_mu = i)`` for ``i = 0..n``.
    """
    if n < 1 or mu < 1:
        raise ValueError("need n >= 1 and mu >= 1")
    i = np.arange(n)
    cdf = np.exp(mu * np.log1p(-np.ldexp(1.0, -(i + 1))))
    cdf = np.append(cdf, 1.0)
    return np.diff(cdf, prepend=0.0)


def _lo_remaining(n, p, i):
    """Expected remaining time of the (1+1) EA on LeadingOnes from level ``i``.

    ``(1/(2p^2)) ((1-p)^(-n+1) - (1-2p)(1-p)^(-i))``, rewritten as
    ``(1-p)^(-i) (expm1(-(n-1-i) log1p(-p)) + 2p) / (2p^2)`` to avoid
    cancellation at small ``p``.
    """
    i = np.asarray(i, dtype=np.float64)
    lg = np.log1p(-p)
    return np.exp(-i * lg) * (np.expm1(-(n - 1 - i) * lg) + 2.0 * p) / (2.0 * p * p)


def lo_expected_time(n: int, p: float, mu: int = 1, method: str = "simplified") -> float:
    """Exact expected optimisation time of the (1+1)_mu EA on LeadingOnes.

    Initialisation evaluations are not counted.

    Parameters
    ----------
    method : {"simplified", "sum"}
        ``"sum"`` evaluates the double sum
        ``sum_i P(X=i) (1/p) ((1-p)^(-i) + 1/2 sum_{j>i} (1-p)^(-j))``;
        ``"simplified"`` uses its closed inner form. Both agree up to rounding.
    """
    p = check_rate(p)
    probs = lo_init_distribution(n, mu)[:n]
    i = np.arange(n)
    if method == "simplified":
        terms = _lo_remaining(n, p, i)
    elif method == "sum":
        inv = _pow1m(p, -i.astype(np.float64))
        tail = np.flip(np.cumsum(np.flip(inv)))
        after = np.append(tail[1:], 0.0)
        terms = (inv + 0.5 * after) / p
    else:
        raise ValueError(f"unknown method {method!r}")
    return math.fsum((probs * terms).tolist())


def lo_one_plus_one_exact(n: int, p: float) -> float:
    """Exact expected time of the (1+1) EA on LeadingOnes with uniform start:
    ``(1/(2p^2)) ((1-p)^(-n+1) - (1-p))``."""
    p = check_rate(p)
    if n < 1:
        raise ValueError("n must be >= 1")
    with np.errstate(over="ignore"):
        return float((1.0 - p) * np.expm1(-n * np.log1p(-p)) / (2.0 * p * p))


def log_lo_one_plus_one_exact(n: int, p: float) -> float:
    """Natural log of :func:`lo_one_plus_one_exact`, finite where the value overflows."""
    p = check_rate(p)
    x = -n * math.log1p(-p)
    log_expm1 = x + math.log(-math.expm1(-x)) if x > 1.0 else math.log(math.expm1(x))
    return math.log1p(-p) + log_expm1 - math.log(2.0 * p * p)


@dataclass
class RateOptimum:
    """Minimiser found by a grid-bracketed golden-section search."""

    p: float
    value: float
    grid_unimodal: bool


def _bracketed_min(objective, grid):
    values = np.array([objective(x) for x in grid])
    k = int(np.argmin(values))
    diffs = np.sign(np.diff(values))
    diffs = diffs[diffs != 0]
    unimodal = bool(np.all(np.diff(diffs) >= 0))
    if k == 0 or k == grid.size - 1:
        return RateOptimum(float(grid[k]), float(values[k]), unimodal)
    res = optimize.minimize_scalar(objective, bracket=(grid[k - 1], grid[k], grid[k + 1]),
                                   method="golden", tol=1e-10)
    x = float(res.x)
    if not grid[k - 1] <= x <= grid[k + 1]:
        x = float(grid[k])
    return RateOptimum(x, float(objective(x)), unimodal)


def lo_optimal_rate(n: int, full: bool = False):
    """Mutation probability minimising :func:`lo_one_plus_one_exact` over ``(0, 1/2]``.

    A log-spaced grid brackets the minimum, golden-section search refines it
    to relative tolerance ``1e-10``. With ``full=True`` a :class:`RateOptimum`
    is returned, which also says whether the grid looked unimodal.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    grid = np.unique(np.append(np.geomspace(0.01 / n, 0.5, 400), 0.5))

    def objective(q):
        return log_lo_one_plus_one_exact(n, min(max(q, 1e-300), 0.5))

    best = _bracketed_min(objective, grid)
    best.value = math.exp(best.value)
    return best if full else best.p


# --------------------------------------------------------------------- OneMax

def harmonic(n: int) -> float:
    """``H(n)``: exact summation up to ``10**7``, digamma beyond."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n <= EXACT_HARMONIC_LIMIT:
        return float(np.sum(1.0 / np.arange(n, 0, -1, dtype=np.float64))) if n else 0.0
    return float(special.digamma(n + 1.0) + np.euler_gamma)


def _check_open_rate(p):
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p!r}")
    return p


def onemax_upper(n: int, p: float) -> float:
    """Fitness-level upper bound ``H(n) / (p (1-p)^(n-1))`` for OneMax."""
    p = _check_open_rate(p)
    return float(harmonic(n) / (p * _pow1m(p, n - 1)))


SMALL_P, LARGE_P, TRIVIAL = "small-p", "moderate-p", "trivial-fallback"


def _rel_le(a, b):
    return a <= b * (1 + 1e-12)


def onemax_lower_regime(n: int, p: float) -> str:
    """Which lower bound applies: ``2^(-n/3) <= p <= 1/n``, ``1/n <= p <= 1/(sqrt(n) log2 n)``,
    or neither (the trivial bound is used)."""
    p = check_rate(p)
    if n >= 2:
        if _rel_le(2.0 ** (-n / 3.0), p) and _rel_le(p, 1.0 / n):
            return SMALL_P
        if _rel_le(1.0 / n, p) and _rel_le(p, 1.0 / (math.sqrt(n) * math.log2(n))):
            return LARGE_P
    return TRIVIAL


def onemax_lower(n: int, p: float) -> float:
    """Lower bound for every mutation-based EA on OneMax.

    ``(ln n - ln ln n - 3) / (p (1-p)^n)`` for small ``p``,
    ``(ln(1/(p^2 n)) - ln ln n - 3) / (p (1-p)^n)`` for moderately larger ``p``,
    and :func:`trivial_lower` with ``mu = 1`` outside both ranges (see
    :func:`onemax_lower_regime`). May be negative for small ``n``.
    """
    regime = onemax_lower_regime(n, p)
    if regime == TRIVIAL:
        return trivial_lower(n, p, 1)
    lead = math.log(n) if regime == SMALL_P else -math.log(p * p * n)
    return float((lead - math.log(math.log(n)) - 3.0) / (p * _pow1m(p, n)))


def onemax_lower_p_1_over_n(n: int) -> float:
    """``e n ln n - e n ln ln n - 3 e n``."""
    if n < 2:
        raise ValueError("n must be >= 2")
    return math.e * n * (math.log(n) - math.log(math.log(n)) - 3.0)


def trivial_lower(n: int, p: float, mu: int = 1) -> float:
    """``max((1 - mu 2^-n) / (p n), (1 - mu 2^-n) e^(p n))``."""
    p = check_rate(p)
    if mu < 1:
        raise ValueError("mu must be >= 1")
    miss = 1.0 - mu * 2.0 ** (-n)
    return max(miss / (p * n), miss * math.exp(p * n))


def onemax_transition_exact(n: int, i: int, k: int, p: float) -> float:
    """Probability that mutation turns ``i`` one-bits into ``i + k`` one-bits:
    ``sum_j C(i,j) C(n-i,k+j) p^(k+2j) (1-p)^(n-k-2j)``."""
    _check_transition(n, i, k)
    p = _check_open_rate(p)
    j = np.arange(0, min(i, n - i - k) + 1)
    if j.size == 0:
        return 0.0
    logs = (_log_comb(i, j) + _log_comb(n - i, k + j)
            + (k + 2 * j) * math.log(p) + (n - k - 2 * j) * math.log1p(-p))
    return float(np.exp(special.logsumexp(logs)))


def _log_comb(a, b):
    return special.gammaln(a + 1) - special.gammaln(b + 1) - special.gammaln(a - b + 1)


def _check_transition(n, i, k):
    if n < 1 or not 0 <= i <= n or k < 0 or i + k > n:
        raise ValueError(f"invalid transition n={n}, i={i}, k={k}")


def transition_z(n: int, i: int, p: float) -> float:
    """``i (n-i) p^2 / (1-p)^2``."""
    return i * (n - i) * p * p / (1.0 - p) ** 2


def onemax_transition_bound(n: int, i: int, k: int, p: float, strengthened: bool = False) -> float:
    """Upper bound on :func:`onemax_transition_exact`.

    ``p^k (1-p)^(n-k) (n-i)^k / k! * S`` where ``S = sum_{j=0..n} z^j / (j! (j+1)!)``
    with ``z = i (n-i) p^2 / (1-p)^2``, or ``S = 1 + 3z/5`` when
    ``strengthened``. The strengthened form needs ``z <= 1`` and ``3i >= 2n``;
    it then also bounds the transition from any ``i' <= i`` to ``i + k``.

    Raises
    ------
    ValueError
        If the strengthened form is requested outside its conditions.
    """
    _check_transition(n, i, k)
    p = _check_open_rate(p)
    z = transition_z(n, i, p)
    if strengthened:
        if z > 1.0 + 1e-12 or 3 * i < 2 * n:
            raise ValueError(f"strengthened bound needs z <= 1 and i >= 2n/3 (z={z:.6g}, i={i}, n={n})")
        series = 1.0 + 0.6 * z
    else:
        j = np.arange(n + 1)
        if z == 0.0:
            series = 1.0
        else:
            logs = j * math.log(z) - special.gammaln(j + 1) - special.gammaln(j + 2)
            series = float(np.exp(special.logsumexp(logs)))
    head = k * math.log(p) + (n - k) * math.log1p(-p) - special.gammaln(k + 1)
    if k:
        if n == i:
            return 0.0
        head += k * math.log(n - i)
    return float(math.exp(head) * series)


def cutoff_level(n: int, p: float) -> int:
    """First level ``ceil(n - min(n / log2 n, 1 / (p^2 n log2 n)))`` of the coarse partition."""
    lg = math.log2(n)
    return int(math.ceil(n - min(n / lg, 1.0 / (p * p * n * lg)) - 1e-12))


def onemax_chi(n: int, p: float) -> float:
    """Viscosity ``1 - 1 / ((1-p) log2 n)`` used for the coarse OneMax partition."""
    return 1.0 - 1.0 / ((1.0 - p) * math.log2(n))


def build_onemax_levels(n: int, p: float) -> LevelPartition:
    """Coarse OneMax partition ``A_ell, ..., A_n`` with normalised geometric shares.

    ``A_ell`` holds every point with at most ``ell`` one-bits and receives the
    whole start mass. Rates are ``u_i = u'_i * sum_k g'_k`` with
    ``u'_i = p (1-p)^(n-1) (n-i) (1 + 3z/5)`` and ``g'_k = (p(n-i)/(1-p))^(k-1)``.
    """
    p = check_rate(p)
    if n < 4:
        raise ValueError("coarse OneMax partition needs n >= 4")
    if onemax_lower_regime(n, p) == TRIVIAL:
        raise ValueError(f"p={p} lies outside both ranges of the OneMax lower bound for n={n}")
    ell = cutoff_level(n, p)
    chi = onemax_chi(n, p)
    if not ell < n or chi <= 0:
        raise ValueError(f"n={n} too small for the coarse partition (ell={ell}, chi={chi:.4g})")
    i = np.arange(ell, n)
    z = i * (n - i) * p * p / (1.0 - p) ** 2
    u_prime = p * _pow1m(p, n - 1) * (n - i) * (1.0 + 0.6 * z)
    ratio = p * (n - i) / (1.0 - p)
    norm = _geom_sum(ratio, 0, n - i - 1)
    m = n - ell + 1
    start = np.zeros(m)
    start[0] = 1.0
    return LevelPartition(start, u_prime * norm, GeometricGamma(m, ratio), chi,
                          name=f"onemax-coarse(n={n}, p={p:.6g})",
                          meta={"ell": ell, "n": n, "p": p, "log": "log2"})


def onemax_optimal_rate(n: int, confirm: bool = True) -> float:
    """Rate maximising ``p (1-p)^(n-1)``: exactly ``1/n``.

    With ``confirm`` a grid search over ``(0, 1/2]`` checks that the
    analytic root is the maximiser.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    p_star = 1.0 / n
    if confirm:
        grid = np.geomspace(0.01 / n, 0.5, 2001)
        vals = np.log(grid) + (n - 1) * np.log1p(-grid)
        k = int(np.argmax(vals))
        lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
        if not lo <= p_star <= hi:
            raise ArithmeticError("grid search disagrees with the analytic optimum")
    return p_star


# ----------------------------------------------------------------- LO levels

def build_lo_levels(n: int, p: float, mu: int = 1) -> LevelPartition:
    """Canonical LeadingOnes partition ``A_0..A_n``: ``u_i = p (1-p)^i``,
    shares ``2^(i-k)`` (doubled at the target), viscosity ``1/2`` and the
    best-of-``mu`` start distribution."""
    p = check_rate(p)
    i = np.arange(n, dtype=np.float64)
    return LevelPartition(lo_init_distribution(n, mu), p * _pow1m(p, i), LeadingOnesGamma(n + 1), 0.5,
                          name=f"leadingones(n={n}, p={p:.6g}, mu={mu})",
                          meta={"n": n, "p": p, "mu": mu})


# ---------------------------------------------------------------- long paths

def _path_m(n, k):
    return long_path_length(n, k) - 1


def build_longpath_levels(n: int, k: int, p: float, cap: int = DEFAULT_PATH_CAP) -> LevelPartition:
    """Path-position partition of the long ``k``-path, one level per point.

    With ``r = p/(1-p)`` and ``m`` the last path index:
    ``u_i = (1-p)^n sum_{j=1}^{m-i} r^j``, shares proportional to ``r^j``,
    viscosity ``1 / sum_{j<m} r^j``, band ``k`` and ``alpha = 1 - r^k``.
    Start mass sits on the first point.
    """
    p = check_rate(p)
    length = long_path_length(n, k)
    if length > cap:
        raise ValueError(f"path has {length} points, above cap {cap}")
    m = length - 1
    r = p / (1.0 - p)
    i = np.arange(m, dtype=np.float64)
    rate = _pow1m(p, n) * r * _geom_sum(r, 0, m - i - 1)
    chi = float(1.0 / _geom_sum(r, 0, m - 1))
    start = np.zeros(m + 1)
    start[0] = 1.0
    alpha = float(-np.expm1(k * math.log(r))) if r > 0 else 1.0
    return LevelPartition(start, rate, GeometricGamma(m + 1, r), chi, band=k, alpha=alpha,
                          name=f"longpath(n={n}, k={k}, p={p:.6g})",
                          meta={"n": n, "k": k, "p": p, "m": m})


def longpath_lower(n: int, k: int, p: float) -> float:
    """``(m / (p (1-p)^(n-1))) ((1-2p)/(1-p))^2 (1 - (p/(1-p))^k)^m``,
    with ``m`` the last index of the constructed path."""
    p = check_rate(p)
    m = _path_m(n, k)
    if p == 0.5:
        return 0.0
    r = p / (1.0 - p)
    log_val = (math.log(m) - math.log(p) - (n - 1) * math.log1p(-p)
               + 2.0 * math.log((1.0 - 2.0 * p) / (1.0 - p)) + m * math.log1p(-r**k))
    return _exp(log_val)


def longpath_upper(n: int, k: int, p: float) -> float:
    """``m / (p (1-p)^(n-1))``: follow the path one point at a time."""
    p = check_rate(p)
    m = _path_m(n, k)
    return _exp(math.log(m) - math.log(p) - (n - 1) * math.log1p(-p))


def _exp(x):
    """``exp`` saturating to ``inf`` for path lengths beyond double range."""
    return math.exp(x) if x < 709.0 else math.inf


def longpath_corollary_factor(n: int, p: float) -> float:
    """``1 - 2 sqrt(n) 2^sqrt(n) (p/(1-p))^sqrt(n)`` for the ``k = sqrt(n)`` path."""
    p = check_rate(p)
    s = math.sqrt(n)
    log_term = math.log(2.0 * s) + s * math.log(2.0) + s * math.log(p / (1.0 - p))
    return -math.expm1(log_term) if log_term < 700 else -math.inf


# ----------------------------------------------------------------- registry

def _lo_eq8(n, p, mu=1):
    return lo_expected_time(n, p, mu)


def _lo_eq7(n, p, mu=1):
    return lo_expected_time(n, p, mu, method="sum")


FORMULAS = {
    "lo.exact.1p1": (lo_one_plus_one_exact, ("n", "p"), "exact"),
    "lo.exact.mu": (_lo_eq8, ("n", "p", "mu"), "exact"),
    "lo.exact.mu.sum": (_lo_eq7, ("n", "p", "mu"), "exact"),
    "lo.rate.opt": (lo_optimal_rate, ("n",), "rate"),
    "om.upper": (onemax_upper, ("n", "p"), "upper"),
    "om.lower": (onemax_lower, ("n", "p"), "lower"),
    "om.lower.p1n": (onemax_lower_p_1_over_n, ("n",), "lower"),
    "om.rate.opt": (onemax_optimal_rate, ("n",), "rate"),
    "om.transition.exact": (onemax_transition_exact, ("n", "i", "k", "p"), "probability"),
    "om.transition.bound": (onemax_transition_bound, ("n", "i", "k", "p"), "probability"),
    "om.transition.bound.strong": (
        lambda n, i, k, p: onemax_transition_bound(n, i, k, p, strengthened=True),
        ("n", "i", "k", "p"), "probability"),
    "trivial.lower": (trivial_lower, ("n", "p", "mu"), "lower"),
    "lp.lower": (longpath_lower, ("n", "k", "p"), "lower"),
    "lp.upper": (longpath_upper, ("n", "k", "p"), "upper"),
    "lp.corollary.factor": (longpath_corollary_factor, ("n", "p"), "factor"),
}


def evaluate(name: str, **params) -> dict:
    """Evaluate a registered formula by name.

    Returns ``{"formula", "params", "value", "flags"}``. Flags mark
    non-informative (non-positive) lower bounds, the OneMax lower-bound
    regime and the ``log2`` reading of ``log``.
    """
    if name not in FORMULAS:
        raise KeyError(f"unknown formula {name!r}; known: {', '.join(sorted(FORMULAS))}")
    fn, names, role = FORMULAS[name]
    missing = [k for k in names if k not in params and k != "mu"]
    if missing:
        raise ValueError(f"formula {name} needs {', '.join(missing)}")
    args = {k: params[k] for k in names if k in params}
    value = float(fn(**args))
    flags = []
    if role == "lower" and value <= 0:
        flags.append("non-informative")
    if name == "om.lower":
        flags.append(onemax_lower_regime(args["n"], args["p"]))
        flags.append("log=log2")
    if name == "lo.rate.opt":
        if not lo_optimal_rate(args["n"], full=True).grid_unimodal:
            flags.append("grid-not-unimodal")
    return {"formula": name, "params": args, "value": value, "flags": flags}
