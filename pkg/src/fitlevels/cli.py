"""Command-line entry point: ``fitlevels <subcommand> [flags]``.

Exit status 0 on success, 1 on usage or parameter errors, 2 when a
requested certification fails (``--require-certified``) or a structural
check fails.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from fractions import Fraction
from pathlib import Path


from . import closed_forms as cf
from . import experiments as ex
from . import levels as lv
from . import markov
from .bitstring import BitString
from .engines import ELITIST, POLICIES, EAConfig, run_batch, write_records
from .fitness import build_long_k_path, load_table, make_oracle, path_invariants

EXIT_OK, EXIT_USAGE, EXIT_CONDITION = 0, 1, 2
ORACLES = ["onemax", "leadingones", "longpath", "trap"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def parse_rate(text, n: int | None) -> float:
    """Parse ``0.05``, ``1/3`` or ``c/n`` (resolved against ``n``)."""
    if isinstance(text, (int, float)):
        return float(text)
    s = str(text).strip().replace(" ", "")
    if s.endswith("/n"):
        if n is None:
            raise UsageError(f"rate {text!r} needs --n")
        head = s[:-2] or "1"
        return float(Fraction(head)) / n
    try:
        return float(Fraction(s))
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"cannot parse rate {text!r}") from exc


# ----------------------------------------------------------------- commands

def _oracle(a):
    if getattr(a, "table", None):
        f = load_table(a.table)
        if f.n != a.n:
            raise UsageError(f"table has n={f.n}, but --n is {a.n}")
        return f
    return make_oracle(a.oracle, a.n, k=a.k)


def cmd_simulate(a):
    f = _oracle(a)
    start = BitString.from_str(a.start) if a.start else None
    cfg = EAConfig(a.n, a.p, a.mu, a.policy, a.max_evals, a.count_init, start)
    ex.set_threads(a.threads)
    res = run_batch(f, cfg, a.runs, a.seed, record_trajectories=bool(a.records))
    if a.records:
        write_records(res.records(), a.records)
    return ex.summarize(res.evals, res.censored, a.seed).to_dict(), True


def _partition(a):
    if a.partition == "lo":
        return cf.build_lo_levels(a.n, a.p, a.mu)
    if a.partition == "onemax":
        return cf.build_onemax_levels(a.n, a.p)
    if a.partition == "longpath":
        return cf.build_longpath_levels(a.n, a.k, a.p)
    return lv.LevelPartition.from_json(a.partition)


def cmd_bound(a):
    part = _partition(a)
    kind = a.kind
    if kind == "upper-classic":
        rep = lv.upper_bound_classic(part)
    elif kind == "upper-adaptation":
        rep = lv.upper_bound_with_adaptation(part)
    elif kind == "upper-refined":
        rep = lv.refined_upper_bound(part, a.chi)
    elif kind == "lower-crude":
        rep = lv.lower_bound_crude(part)
    elif kind == "lower-viscosity":
        rep = lv.lower_bound_viscosity(part, a.chi)
    else:
        rep = lv.lower_bound_capped(part, a.band, a.alpha, a.chi)
    return rep.to_dict(), rep.certified


def cmd_exact(a):
    if a.method == "full":
        chain = markov.full_chain(_oracle(a), a.p)
        start = a.start or ("0" * a.n if a.oracle == "longpath" else "uniform")
        value = markov.hitting_time_full(chain, start)
        return markov.result("full", a.n, a.p, value, start=start), True
    if a.oracle == "onemax":
        chain = markov.onemax_level_chain(a.n, a.p, a.mu)
    elif a.oracle == "leadingones":
        chain = markov.lo_level_chain(a.n, a.p, a.mu)
    elif a.oracle == "longpath":
        chain = markov.longpath_level_chain(a.n, a.k, a.p)
    else:
        raise UsageError(f"no level chain for {a.oracle}; use --method full")
    return markov.result("level", a.n, a.p, markov.hitting_time_levels(chain)), True


def cmd_formula(a):
    params = {k: getattr(a, k) for k in ("n", "p", "mu", "k", "i") if getattr(a, k) is not None}
    return cf.evaluate(a.name, **params), True


def cmd_optimize_rate(a):
    if a.oracle == "leadingones":
        opt = cf.lo_optimal_rate(a.n, full=True)
        out = {"p": opt.p, "c": opt.p * a.n, "value": opt.value, "grid_unimodal": opt.grid_unimodal}
    elif a.oracle == "onemax":
        p = cf.onemax_optimal_rate(a.n)
        out = {"p": p, "c": p * a.n, "value": cf.onemax_upper(a.n, p), "grid_unimodal": True}
    else:
        raise UsageError("optimize-rate supports leadingones and onemax")
    return {"oracle": a.oracle, "n": a.n, **out}, True


def cmd_sandwich(a):
    table = ex.sandwich_report(a.oracle, a.n, a.p, a.mu, k=a.k, runs=a.runs, seed=a.seed,
                               threads=a.threads)
    return table, not table.meta["violations"]


def cmd_dominate(a):
    v = ex.domination_experiment(_oracle(a), a.policy, a.p, a.mu, a.runs, a.seed, a.max_evals,
                                 a.threads)
    return v.to_dict(), v.verdict == "PASS"


def cmd_sweep(a):
    grid = ex.parse_grid(a.grid, a.n)
    table = ex.rate_sweep(a.oracle, a.n, grid, a.mu, k=a.k, mode=a.mode, runs=a.runs,
                          seed=a.seed, threads=a.threads)
    return table, True


def cmd_path_check(a):
    path = build_long_k_path(a.n, a.k)
    inv = path_invariants(path)
    ok = all(inv.values())
    return {"verdict": "PASS" if ok else "FAIL", "n": a.n, "k": a.k, "points": len(path),
            "invariants": inv}, ok


# ------------------------------------------------------------------- parser

def _common(sp, oracle=True, rate=True):
    sp.add_argument("--config", help="JSON file supplying any flag; command line wins")
    sp.add_argument("--n", type=int, required=False)
    if rate:
        sp.add_argument("--p", help="mutation probability: decimal, a/b, or c/n")
    sp.add_argument("--mu", type=int, default=1)
    sp.add_argument("--k", type=int)
    if oracle:
        sp.add_argument("--oracle", choices=ORACLES, default="onemax")
    sp.add_argument("--format", choices=["table", "json", "csv"], default="table")
    sp.add_argument("--output", help="write here instead of standard output")
    sp.add_argument("--threads", type=int, default=_env_threads())
    sp.add_argument("--require-certified", action="store_true",
                    help="exit 2 when the result is not certified")


def _env_threads():
    v = os.environ.get(ex.THREADS_ENV)
    return int(v) if v else None


def _mc(sp, runs=1000):
    sp.add_argument("--runs", type=int, default=runs)
    sp.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fitlevels", description="Fitness-level bounds, exact oracles and EA simulation.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("simulate", help="Monte Carlo runs of an EA")
    _common(sp)
    _mc(sp)
    sp.add_argument("--policy", choices=sorted(POLICIES), default=ELITIST)
    sp.add_argument("--max-evals", type=int, default=10**9)
    sp.add_argument("--count-init", action="store_true")
    sp.add_argument("--start", help="forced initial 0/1 string")
    sp.add_argument("--table", help="JSON fitness table (overrides --oracle)")
    sp.add_argument("--records", help="write per-run JSON lines here")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("bound", help="evaluate a fitness-level bound")
    _common(sp, oracle=False)
    sp.add_argument("--partition", required=False, default="lo",
                    help="lo | onemax | longpath | path to a partition JSON file")
    sp.add_argument("--kind", default="upper-classic",
                    choices=["upper-classic", "upper-refined", "upper-adaptation",
                             "lower-crude", "lower-viscosity", "lower-capped"])
    sp.add_argument("--chi", type=float)
    sp.add_argument("--band", type=int)
    sp.add_argument("--alpha", type=float)
    sp.set_defaults(func=cmd_bound)

    sp = sub.add_parser("exact", help="exact expected time from a Markov chain")
    _common(sp)
    sp.add_argument("--method", choices=["level", "full"], default="level")
    sp.add_argument("--start", help="fixed start string for --method full (default uniform)")
    sp.add_argument("--table", help="JSON fitness table (full chain only)")
    sp.set_defaults(func=cmd_exact)

    sp = sub.add_parser("formula", help="evaluate a named closed form")
    _common(sp, oracle=False)
    sp.add_argument("--name", required=False, choices=sorted(cf.FORMULAS))
    sp.add_argument("--i", type=int)
    sp.set_defaults(func=cmd_formula)

    sp = sub.add_parser("optimize-rate", help="optimal static mutation probability")
    _common(sp, rate=False)
    sp.set_defaults(func=cmd_optimize_rate)

    sp = sub.add_parser("sandwich", help="lower bounds, exact values and upper bounds side by side")
    _common(sp)
    _mc(sp, runs=0)
    sp.set_defaults(func=cmd_sandwich)

    sp = sub.add_parser("dominate", help="mean time on a unique-optimum function vs exact OneMax")
    _common(sp)
    _mc(sp, runs=10**4)
    sp.add_argument("--policy", choices=sorted(POLICIES), default=ELITIST)
    sp.add_argument("--max-evals", type=int)
    sp.add_argument("--table", help="JSON fitness table (overrides --oracle)")
    sp.set_defaults(func=cmd_dominate)

    sp = sub.add_parser("sweep", help="expected time over a grid of mutation probabilities")
    _common(sp, rate=False)
    _mc(sp, runs=0)
    sp.add_argument("--grid", default="0.5/n:3/n:0.1/n", help="start:stop:step or comma list")
    sp.add_argument("--mode", choices=["auto", "formula", "exact"], default="auto")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("path-check", help="verify the long k-path invariants")
    _common(sp, oracle=False, rate=False)
    sp.set_defaults(func=cmd_path_check)
    return parser


def _with_config(parser, argv):
    """Parse once to find the subcommand and --config, then reparse with the
    file's values as defaults so explicit flags override them."""
    args = parser.parse_args(argv)
    if not args.config:
        return args
    config = json.loads(Path(args.config).read_text())
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in sub._actions}
    values = {}
    for key, value in config.items():
        dest = key.replace("-", "_")
        if dest not in known or dest in ("config", "help"):
            raise UsageError(f"unknown configuration key {key!r}")
        values[dest] = value
    sub.set_defaults(**values)
    for action in sub._actions:
        if action.dest in values:
            action.required = False
    return parser.parse_args(argv)


def _resolve(args):
    if getattr(args, "n", None) is None and args.command != "formula":
        raise UsageError("--n is required")
    if hasattr(args, "p"):
        if args.p is None and args.command not in ("formula",):
            raise UsageError("--p is required")
        if args.p is not None:
            args.p = parse_rate(args.p, args.n)
    if args.command == "formula" and not args.name:
        raise UsageError("--name is required")
    return args


def _config_echo(args) -> dict:
    skip = {"func", "config", "output"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def render(result, config: dict, fmt: str) -> str:
    if isinstance(result, ex.Table):
        if fmt == "json":
            return json.dumps({"config": config, "result": result.to_dict()}, indent=2,
                              default=ex._json_default)
        if fmt == "csv":
            return f"# config: {json.dumps(config)}\n" + result.to_csv()
        return f"# config: {json.dumps(config)}\n" + result.to_text()
    if fmt == "json":
        return json.dumps({"config": config, "result": result}, indent=2, default=ex._json_default)
    flat = _flatten(result)
    if fmt == "csv":
        return (f"# config: {json.dumps(config)}\n" + ",".join(flat) + "\n"
                + ",".join(ex._fmt(v) for v in flat.values()))
    width = max(len(k) for k in flat)
    lines = [f"# config: {json.dumps(config)}"]
    lines += [f"{k.ljust(width)}  {ex._fmt(v)}" for k, v in flat.items()]
    return "\n".join(lines)


def _flatten(d, prefix=""):
    out = {}
    for key, value in d.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flatten(value, name + "."))
        elif isinstance(value, list) and value and isinstance(value[0], dict):
            for i, item in enumerate(value):
                out.update(_flatten(item, f"{name}.{i}."))
        else:
            out[name] = value
    return out


def main(argv=None) -> int:
    # numba falls back from an old TBB on its own; the notice is noise here
    warnings.filterwarnings("ignore", message="The TBB threading layer")
    parser = build_parser()
    try:
        args = _resolve(_with_config(parser, argv))
        result, ok = args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = render(result, _config_echo(args), args.format)
    if args.output:
        Path(args.output).write_text(text + "\n")
    else:
        print(text)
    strict = args.require_certified or args.command == "path-check"
    return EXIT_CONDITION if strict and not ok else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
