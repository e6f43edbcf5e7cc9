"""Command-line entry point.

Exit codes: 0 success, 1 invalid input, 2 numeric or equilibrium failure,
3 resource budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .dist import UniformInterval
from .errors import BudgetExceeded, DomainError, NestedSearchError, UnsupportedOperation, ValidationError
from .index import IndexTable
from .oracle import DEFAULT_BUDGET, verify_optimality
from .policy import make_policy, simulate
from .pricing import (BENCHMARK, STAGE1, MarketModel, duopoly_fixed_point, elasticity, equilibrium_report,
                      market_to_dict, parse_market, regulation_report)
from .tree import load_tree, path_str, random_tree

DIGITS = 12


def fmt(x):
    """Real number with 12 significant digits, as text."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.{DIGITS}g}"


def _round(obj):
    """Recursively round floats to 12 significant digits for JSON output."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, float):
        return fmt(obj) if not math.isfinite(obj) else float(fmt(obj))
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, np.floating):
        return _round(float(obj))
    return obj


@dataclass
class RunRecord:
    command: str
    input_digest: str
    seed: int | None
    version: str = __version__
    outputs: dict = field(default_factory=dict)

    def to_json(self):
        doc = {"command": self.command, "input_digest": self.input_digest, "seed": self.seed,
               "version": self.version, "outputs": _round(self.outputs)}
        return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def digest(*chunks):
    h = hashlib.sha256()
    for c in chunks:
        h.update(c if isinstance(c, bytes) else str(c).encode())
        h.update(b"\0")
    return h.hexdigest()


def _read(path):
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from None


def _load_json(path):
    raw = _read(path)
    try:
        return raw, json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path} is not valid JSON: {exc}") from None


def _emit(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------
# tree commands


def cmd_tree_index(args):
    raw = _read(args.tree)
    tree = load_tree(args.tree)
    table = IndexTable(tree, seed=args.seed)
    rows = [{"node": path_str(e.node), "ancestors": list(e.ancestors), "sigma": e.sigma,
             "degenerate": e.degenerate} for e in table.entries()]
    outputs = {"entries": rows}
    if table.offset_rule:
        outputs["offset_rule"] = table.offset_rule
    return RunRecord("tree index", digest(raw), args.seed, outputs=outputs)


def cmd_tree_simulate(args):
    raw = _read(args.tree)
    tree = load_tree(args.tree)
    policy = make_policy(args.policy, tree, seed=args.seed)
    res = simulate(tree, policy, draws=args.draws, seed=args.seed, trace=args.trace)
    outputs = {"policy": args.policy, **res.as_dict()}
    return RunRecord("tree simulate", digest(raw, args.policy, args.draws), args.seed, outputs=outputs)


def cmd_tree_verify(args):
    raw = _read(args.tree)
    tree = load_tree(args.tree)
    report = verify_optimality(tree, budget=args.budget)
    rec = RunRecord("tree verify", digest(raw), None, outputs=report.as_dict())
    rec.passed = report.passed
    return rec


# --------------------------------------------------------------------------
# pricing commands

CSV_COLUMNS = ("F", "G", "cX", "cY", "n", "L", "r", "sigma", "sigma_hat", "sigma_star", "sigma_hat_star",
               "stage2_threshold", "p_star", "p_dagger", "p_hat", "cs_stage1", "cs_stage2", "cs_benchmark",
               "log_concave", "stage1_active", "stage2_active", "benchmark_active")


def _market_row(m):
    rep = equilibrium_report(m).as_dict()
    lit = market_to_dict(m)
    row = {k: json.dumps(lit[k], separators=(",", ":")) if k in ("F", "G") else lit[k] for k in lit}
    row.update(rep)
    return row


def _csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        w.writerow([v if isinstance(v, str) else fmt(v) for v in (row.get(c) for c in CSV_COLUMNS)])
    return buf.getvalue()


def cmd_pricing_solve(args):
    raw, doc = _load_json(args.market)
    m = parse_market(doc)
    if m.n != math.inf:
        raise DomainError("pricing solve needs n = \"inf\"; use pricing duopoly for finite n")
    if args.out and str(args.out).endswith(".csv"):
        return _csv([_market_row(m)])
    rep = equilibrium_report(m).as_dict()
    reg = regulation_report(m).as_dict()
    return RunRecord("pricing solve", digest(raw), None,
                     outputs={"market": market_to_dict(m), "equilibrium": rep,
                              "regulation": {k: reg[k] for k in ("regulated_price", "unregulated_price",
                                                                 "surplus_gain")}})


def cmd_pricing_duopoly(args):
    raw, doc = _load_json(args.market)
    m = parse_market(doc)
    out = {"market": market_to_dict(m)}
    for regime in (STAGE1, BENCHMARK):
        out[regime] = duopoly_fixed_point(m, regime, tol=args.tol).as_dict()
    return RunRecord("pricing duopoly", digest(raw, args.tol), None, outputs=out)


def cmd_pricing_compare(args):
    raw, doc = _load_json(args.sweep)
    if isinstance(doc, dict):
        doc = doc.get("markets")
    if not isinstance(doc, list) or not doc:
        raise ValidationError("sweep file must be a non-empty list of markets (or {\"markets\": [...]})")
    rows = []
    for i, item in enumerate(doc):
        try:
            m = parse_market(item)
        except ValidationError as exc:
            raise ValidationError(f"market {i}: {exc}", [f"market {i}: {p}" for p in exc.problems]) from None
        rows.append(_market_row(m))
    return _csv(rows)


# --------------------------------------------------------------------------
# selftest


def golden_values():
    """The uniform two-stage example: thresholds, duopoly candidates and monopolistic prices."""
    u = UniformInterval(0.0, 1.0)
    mono = MarketModel(u, u, 0.05, 0.1)
    duo = MarketModel(u, u, 0.05, 0.1, n=2, L=1.0)
    stage1 = duopoly_fixed_point(duo, STAGE1)
    bench = duopoly_fixed_point(duo, BENCHMARK)
    rep = equilibrium_report(mono)
    return {
        "r": mono.r,
        "sigma": mono.sigma,
        "sigma_hat": mono.sigma_hat,
        "duopoly_p_star": stage1.price,
        "duopoly_p_hat": bench.price,
        "duopoly_p_star_residual": stage1.residual,
        "duopoly_p_hat_residual": bench.residual,
        "duopoly_p_star_profit_slope": stage1.profit_slope,
        "duopoly_p_hat_profit_slope": bench.profit_slope,
        "p_star": rep.p_star,
        "p_dagger": rep.p_dagger,
        "p_hat": rep.p_hat,
        "elasticity_at_half": elasticity(mono, STAGE1, 0.5),
    }


GOLDEN_CHECKS = (("r", 0.55279, 5e-4), ("sigma", 1.1393, 5e-4), ("sigma_hat", 1.0345, 5e-4),
                 ("duopoly_p_star", 0.6989, 1e-3), ("duopoly_p_hat", 0.5671, 1e-3))


def run_selftest(seed=0, trees=20):
    vals = golden_values()
    checks = {k: abs(vals[k] - ref) <= tol for k, ref, tol in GOLDEN_CHECKS}
    checks["reversal"] = vals["duopoly_p_star"] > vals["duopoly_p_hat"]
    rng = np.random.default_rng(seed)
    battery = []
    for _ in range(trees):
        rep = verify_optimality(random_tree(rng))
        battery.append({"optimal_value": rep.optimal_value, "index_value": rep.index_value, "gap": rep.gap,
                        "passed": rep.passed})
    checks["oracle_battery"] = all(b["passed"] for b in battery)
    return {"golden": vals, "checks": checks, "battery": battery, "passed": all(checks.values())}


def cmd_selftest(args):
    res = run_selftest(args.seed, args.trees)
    g = res["golden"]
    for k, _, _ in GOLDEN_CHECKS:
        print(f"{k} = {fmt(g[k])}", file=sys.stderr if args.out is None else sys.stdout)
    rec = RunRecord("selftest", digest(args.seed, args.trees), args.seed, outputs=res)
    rec.passed = res["passed"]
    return rec


# --------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def build_parser():
    p = _Parser(prog="nestedsearch", description="Index policies for nested search and two-stage search pricing.")
    p.add_argument("--version", action="version", version=__version__)
    top = p.add_subparsers(dest="group", required=True, parser_class=_Parser)

    tree = top.add_parser("tree", help="search trees")
    tsub = tree.add_subparsers(dest="command", required=True, parser_class=_Parser)
    t_index = tsub.add_parser("index", help="dump the index table")
    t_sim = tsub.add_parser("simulate", help="Monte Carlo payoff of a policy")
    t_ver = tsub.add_parser("verify", help="compare the index policy with the brute-force optimum")
    for sp in (t_index, t_sim, t_ver):
        sp.add_argument("--tree", required=True)
        sp.add_argument("--out")
    t_index.add_argument("--seed", type=int, default=0)
    t_sim.add_argument("--policy", default="index",
                       choices=("index", "greedy", "random", "never", "depth_first", "exhaustive_best",
                                "exhaustive_worst"))
    t_sim.add_argument("--draws", type=int, default=100_000)
    t_sim.add_argument("--seed", type=int, default=0)
    t_sim.add_argument("--trace", type=int, default=0)
    t_ver.add_argument("--budget", type=float, default=DEFAULT_BUDGET)
    t_index.set_defaults(fn=cmd_tree_index)
    t_sim.set_defaults(fn=cmd_tree_simulate)
    t_ver.set_defaults(fn=cmd_tree_verify)

    pr = top.add_parser("pricing", help="two-stage search markets")
    psub = pr.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p_solve = psub.add_parser("solve", help="monopolistic-competition equilibrium report")
    p_duo = psub.add_parser("duopoly", help="small-market candidate prices")
    p_cmp = psub.add_parser("compare", help="CSV comparison over a sweep of markets")
    for sp in (p_solve, p_duo):
        sp.add_argument("--market", required=True)
        sp.add_argument("--out")
    p_duo.add_argument("--tol", type=float, default=1e-12)
    p_cmp.add_argument("--sweep", required=True)
    p_cmp.add_argument("--out")
    p_solve.set_defaults(fn=cmd_pricing_solve)
    p_duo.set_defaults(fn=cmd_pricing_duopoly)
    p_cmp.set_defaults(fn=cmd_pricing_compare)

    st = top.add_parser("selftest", help="golden example plus an oracle battery")
    st.add_argument("--seed", type=int, default=0)
    st.add_argument("--trees", type=int, default=20)
    st.add_argument("--out")
    st.set_defaults(fn=cmd_selftest, group="selftest")
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    start = time.perf_counter()
    try:
        result = args.fn(args)
    except BudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValidationError as exc:
        for line in exc.problems:
            print(f"error: {line}", file=sys.stderr)
        return 1
    except UnsupportedOperation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NestedSearchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = result if isinstance(result, str) else result.to_json()
    _emit(text, args.out)
    # timing goes to stderr so output files stay byte-identical
    print(f"done in {time.perf_counter() - start:.2f}s", file=sys.stderr)
    if getattr(result, "passed", True) is False:
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
