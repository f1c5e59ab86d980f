"""Monte Carlo campaigns and cross-module experiments.

Every campaign is reproducible from its base seed: run ``r`` always uses
random stream ``r``, so the thread count changes wall time only.
"""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from importlib import metadata

import numba
import numpy as np
import scipy
from scipy import stats

from . import closed_forms as cf
from . import levels as lv
from . import markov
from .bitstring import BitString, check_rate
from .engines import ALL_HISTORY, CURRENT_BEST, ELITIST, TRUNCATION, EAConfig, run_batch
from .fitness import FitnessOracle, make_oracle

THREADS_ENV = "FITLEVELS_THREADS"
GENERIC_POLICIES = (ALL_HISTORY, CURRENT_BEST, TRUNCATION)


def set_threads(threads: int | None) -> int:
    """Bound the numba thread pool; returns the count in effect."""
    if threads is not None:
        numba.set_num_threads(max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS)))
    return numba.get_num_threads()


def provenance(**extra) -> dict:
    """Package and library versions plus caller-supplied fields."""
    try:
        version = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        version = "unknown"
    return {"package": "fitlevels", "version": version, "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__, **extra}


@dataclass
class Table:
    """Rows of dictionaries with provenance; renders as text, CSV or JSON."""

    columns: list
    rows: list
    meta: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"columns": self.columns, "rows": self.rows, "meta": self.meta,
                "provenance": self.provenance}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, default=_json_default)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("".join(f"# {k}: {json.dumps(v, default=_json_default)}\n"
                          for k, v in {**self.provenance, **self.meta}.items()))
        writer = csv.DictWriter(buf, fieldnames=self.columns, extrasaction="ignore",
                                lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow({k: _fmt(row.get(k)) for k in self.columns})
        return buf.getvalue()

    def to_text(self) -> str:
        cells = [[str(c) for c in self.columns]]
        cells += [[_fmt(row.get(c)) for c in self.columns] for row in self.rows]
        widths = [max(len(r[i]) for r in cells) for i in range(len(self.columns))]
        lines = ["  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() for r in cells]
        lines += [f"{k}: {v}" for k, v in self.meta.items()]
        return "\n".join(lines)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


# ------------------------------------------------------------------ campaigns

@dataclass
class Campaign:
    """A batch of independent runs of one configuration on one oracle kind."""

    oracle: str
    n: int
    p: float
    runs: int
    seed: int = 0
    mu: int = 1
    policy: str = ELITIST
    k: int | None = None
    max_evaluations: int = 10**9
    count_init: bool = False
    start: str | None = None
    threads: int | None = None

    def build(self):
        f = make_oracle(self.oracle, self.n, k=self.k)
        start = BitString.from_str(self.start) if self.start else None
        cfg = EAConfig(self.n, self.p, self.mu, self.policy, self.max_evaluations,
                       self.count_init, start)
        return f, cfg


@dataclass
class Estimate:
    """Summary of a campaign; censored runs are excluded from the statistics."""

    mean: float
    variance: float
    half_width: float
    confidence: float
    runs: int
    used: int
    censored: int
    seed: int
    flags: list = field(default_factory=list)

    @property
    def stderr(self) -> float:
        return math.sqrt(self.variance / self.used)

    def interval(self, confidence: float) -> tuple:
        t = stats.t.ppf(0.5 + confidence / 2, self.used - 1)
        return self.mean - t * self.stderr, self.mean + t * self.stderr

    def to_dict(self) -> dict:
        return {**asdict(self), "stderr": self.stderr}


def summarize(evals, censored, seed=0, confidence: float = 0.95) -> Estimate:
    """Mean, sample variance and t-based confidence half-width of uncensored runs."""
    evals = np.asarray(evals)
    censored = np.asarray(censored, dtype=bool)
    used = evals[~censored].astype(np.float64)
    flags = []
    if used.size == 0:
        raise RuntimeError("every run was censored")
    if censored.any():
        flags.append("censored-runs-excluded")
        warnings.warn(f"{int(censored.sum())} censored runs excluded from the mean", stacklevel=2)
    if used.size < 2:
        raise ValueError("need at least two uncensored runs")
    mean = float(used.mean())
    var = float(used.var(ddof=1))
    t = stats.t.ppf(0.5 + confidence / 2, used.size - 1)
    return Estimate(mean, var, float(t * math.sqrt(var / used.size)), confidence,
                    int(evals.size), int(used.size), int(censored.sum()), int(seed), flags)


def estimate(campaign: Campaign, confidence: float = 0.95) -> Estimate:
    """Run the campaign and summarise it."""
    if campaign.runs < 2:
        raise ValueError("need at least two runs")
    set_threads(campaign.threads)
    f, cfg = campaign.build()
    res = run_batch(f, cfg, campaign.runs, campaign.seed)
    return summarize(res.evals, res.censored, campaign.seed, confidence)


# ------------------------------------------------------------------- sandwich

SANDWICH_COLUMNS = ["method", "role", "value", "half_width", "certified", "source"]


def _row(method, role, value, source, certified=True, half_width=None):
    return {"method": method, "role": role, "value": float(value), "half_width": half_width,
            "certified": certified, "source": source}


def _ordering(rows, rtol=1e-9):
    """Pairs ``(lower, other)`` where a certified lower value exceeds an exact
    value, an upper bound, or a Monte Carlo interval."""
    bad = []
    lowers = [r for r in rows if r["role"] == "lower" and r["certified"] and r["value"] > 0]
    others = [r for r in rows if r["role"] in ("exact", "upper", "estimate") and r["certified"]]
    exacts = [r for r in rows if r["role"] == "exact"]
    uppers = [r for r in rows if r["role"] == "upper" and r["certified"]]
    for lo in lowers:
        for o in others:
            slack = 3.0 * (o["half_width"] or 0.0) / 1.96 if o["role"] == "estimate" else 0.0
            if lo["value"] > o["value"] * (1 + rtol) + slack:
                bad.append(f"{lo['method']} > {o['method']}")
    for ex in exacts:
        for up in uppers:
            if ex["value"] > up["value"] * (1 + rtol):
                bad.append(f"{ex['method']} > {up['method']}")
    return bad


def sandwich_report(oracle: str, n: int, p: float, mu: int = 1, *, k: int | None = None,
                    runs: int = 0, seed: int = 0, threads: int | None = None) -> Table:
    """Lower bounds, exact values, Monte Carlo estimate and upper bounds side by side.

    Rows whose ordering is violated are listed in ``meta["violations"]`` and
    marked in the ``flag`` column.
    """
    p = check_rate(p)
    rows = []
    mc_start = None
    if oracle == "onemax":
        rows.append(_row("trivial_lower", "lower", cf.trivial_lower(n, p, mu), "trivial.lower"))
        regime = cf.onemax_lower_regime(n, p)
        if regime != cf.TRIVIAL:
            rows.append(_row("onemax_lower", "lower", cf.onemax_lower(n, p), "om.lower"))
            try:
                rep = lv.lower_bound_viscosity(cf.build_onemax_levels(n, p))
                rows.append(_row("coarse_viscosity_lower", "lower", rep.value,
                                 "build_onemax_levels", rep.certified))
            except ValueError:
                pass
        if n <= markov.ONEMAX_CHAIN_MAX_BITS:
            rows.append(_row("markov_exact", "exact",
                             markov.hitting_time_levels(markov.onemax_level_chain(n, p, mu)),
                             "onemax_level_chain"))
        rows.append(_row("onemax_upper", "upper", cf.onemax_upper(n, p), "om.upper"))
        i = np.arange(n, dtype=np.float64)
        part = lv.LevelPartition(markov.onemax_start(n, mu), (n - i) * p * (1 - p) ** (n - 1))
        rows.append(_row("classic_upper", "upper", lv.upper_bound_classic(part).value,
                         "upper_bound_classic"))
    elif oracle == "leadingones":
        part = cf.build_lo_levels(n, p, mu)
        rows.append(_row("trivial_lower", "lower", cf.trivial_lower(n, p, mu), "trivial.lower"))
        rep = lv.lower_bound_viscosity(part)
        rows.append(_row("viscosity_lower", "lower", rep.value, "lower_bound_viscosity", rep.certified))
        rows.append(_row("closed_form_exact", "exact", cf.lo_expected_time(n, p, mu), "lo.exact.mu"))
        rows.append(_row("markov_exact", "exact",
                         markov.hitting_time_levels(markov.lo_level_chain(n, p, mu)), "lo_level_chain"))
        rep = lv.refined_upper_bound(part)
        rows.append(_row("refined_upper", "upper", rep.value, "refined_upper_bound", rep.certified))
        rows.append(_row("classic_upper", "upper", lv.upper_bound_classic(part).value,
                         "upper_bound_classic"))
    elif oracle == "longpath":
        if k is None:
            raise ValueError("longpath needs k")
        if mu != 1:
            raise ValueError("long-path experiments start on the first path point (mu = 1)")
        mc_start = "0" * n
        rows.append(_row("path_lower", "lower", cf.longpath_lower(n, k, p), "lp.lower"))
        rep = lv.lower_bound_capped(cf.build_longpath_levels(n, k, p))
        rows.append(_row("capped_lower", "lower", rep.value, "lower_bound_capped", rep.certified))
        try:
            rows.append(_row("markov_exact", "exact",
                             markov.hitting_time_levels(markov.longpath_level_chain(n, k, p)),
                             "longpath_level_chain"))
        except ValueError:
            pass
        rows.append(_row("path_upper", "upper", cf.longpath_upper(n, k, p), "lp.upper"))
    else:
        raise ValueError(f"no sandwich formulas for oracle {oracle!r}")
    if runs:
        est = estimate(Campaign(oracle, n, p, runs, seed, mu, k=k, start=mc_start, threads=threads))
        rows.append(_row("monte_carlo", "estimate", est.mean, f"campaign seed={seed} runs={runs}",
                         half_width=est.half_width))
    order = {"lower": 0, "estimate": 1, "exact": 1, "upper": 2}
    rows.sort(key=lambda r: (order[r["role"]], r["value"]))
    violations = _ordering(rows)
    for r in rows:
        r["flag"] = "VIOLATION" if any(v.startswith(r["method"] + " ") for v in violations) else ""
    meta = {"oracle": oracle, "n": n, "p": p, "mu": mu, "k": k, "violations": violations}
    return Table(SANDWICH_COLUMNS + ["flag"], rows, meta,
                 provenance(seed=seed if runs else None, formulas=[r["source"] for r in rows]))


# ----------------------------------------------------------------- domination

@dataclass
class Verdict:
    """Outcome of a domination experiment against the exact OneMax value."""

    verdict: str
    mean: float
    stderr: float
    exact_onemax: float
    margin: float
    runs: int
    censored: int
    policy: str
    oracle: str
    seed: int

    def to_dict(self) -> dict:
        return asdict(self)


def onemax_reference(n: int, p: float, mu: int = 1) -> float:
    """Exact expected time of the (1+1)_mu EA on OneMax (initialisation excluded)."""
    return markov.hitting_time_levels(markov.onemax_level_chain(n, p, mu))


def domination_experiment(f: FitnessOracle, policy: str, p: float, mu: int = 1, runs: int = 10**4,
                          seed: int = 0, max_evaluations: int | None = None,
                          threads: int | None = None) -> Verdict:
    """Check that the mean time on ``f`` is at least the exact OneMax time.

    Censored runs count at the cap, which can only lower the observed mean:
    a PASS stays sound, a FAIL with censored runs becomes INCONCLUSIVE.
    PASS requires ``mean + 3 * stderr >= exact``.
    """
    if f.n > markov.FULL_CHAIN_MAX_BITS or not f.has_unique_optimum():
        raise ValueError("domination experiments need a unique optimum (checked for n <= 12)")
    exact = onemax_reference(f.n, p, mu)
    cap = max_evaluations if max_evaluations is not None else int(max(1000, 50 * exact))
    set_threads(threads)
    cfg = EAConfig(f.n, p, mu, policy, cap)
    res = run_batch(f, cfg, runs, seed)
    evals = res.evals.astype(np.float64)
    mean = float(evals.mean())
    se = float(evals.std(ddof=1) / math.sqrt(runs))
    censored = int(res.censored.sum())
    margin = mean + 3.0 * se - exact
    if margin >= 0:
        verdict = "PASS"
    else:
        verdict = "INCONCLUSIVE" if censored else "FAIL"
    return Verdict(verdict, mean, se, exact, margin, runs, censored, policy, f.name, seed)


# ----------------------------------------------------------------- rate sweep

def parse_grid(spec: str, n: int) -> np.ndarray:
    """``"start:stop:step"`` or a comma list; entries may be ``c/n``."""
    from .cli import parse_rate

    if ":" in spec:
        a, b, s = (parse_rate(x, n) for x in spec.split(":"))
        count = int(round((b - a) / s)) + 1
        return a + s * np.arange(count)
    return np.array([parse_rate(x, n) for x in spec.split(",")])


def rate_sweep(oracle: str, n: int, grid, mu: int = 1, *, k: int | None = None,
               mode: str = "auto", runs: int = 0, seed: int = 0, threads: int | None = None) -> Table:
    """Evaluate expected times over a grid of mutation probabilities.

    ``mode`` selects the primary column: ``formula`` (closed form), ``exact``
    (Markov chain) or ``auto`` (exact when a chain is available). With
    ``runs > 0`` a Monte Carlo mean is added per grid point. The argmin of the
    primary column is reported in ``meta``.
    """
    grid = np.asarray(grid, dtype=np.float64)
    for q in grid:
        check_rate(q)
    rows = []
    for q in grid:
        row = {"p": float(q), "c": float(q * n)}
        if oracle == "leadingones":
            row["formula"] = cf.lo_expected_time(n, q, mu)
            if mode in ("exact", "auto"):
                row["exact"] = markov.hitting_time_levels(markov.lo_level_chain(n, q, mu))
        elif oracle == "onemax":
            row["formula"] = cf.onemax_upper(n, q)
            row["lower"] = cf.onemax_lower(n, q)
            if mode in ("exact", "auto"):
                row["exact"] = onemax_reference(n, q, mu)
        elif oracle == "longpath":
            row["formula"] = cf.longpath_upper(n, k, q)
            row["lower"] = cf.longpath_lower(n, k, q)
            if mode in ("exact", "auto"):
                try:
                    row["exact"] = markov.hitting_time_levels(markov.longpath_level_chain(n, k, q))
                except ValueError:
                    if mode == "exact":
                        raise
        else:
            raise ValueError(f"no sweep formulas for oracle {oracle!r}")
        if runs:
            start = "0" * n if oracle == "longpath" else None
            est = estimate(Campaign(oracle, n, float(q), runs, seed, mu, k=k, start=start,
                                    threads=threads))
            row["mc_mean"], row["mc_half_width"] = est.mean, est.half_width
        rows.append(row)
    primary = "exact" if all("exact" in r for r in rows) and mode != "formula" else "formula"
    values = np.array([r[primary] for r in rows])
    best = int(np.argmin(values))
    for i, r in enumerate(rows):
        r["argmin"] = "*" if i == best else ""
    columns = list(dict.fromkeys(c for r in rows for c in r))
    meta = {"oracle": oracle, "n": n, "mu": mu, "k": k, "primary": primary,
            "argmin_p": float(grid[best]), "argmin_c": float(grid[best] * n)}
    return Table(columns, rows, meta, provenance(seed=seed if runs else None))
