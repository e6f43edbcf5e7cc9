"""Acceptance criteria, one test each; run with ``pytest -s`` to see the PASS/FAIL lines."""

import subprocess
import sys
import time

import numpy as np
import pytest

from nestedsearch.cli import GOLDEN_CHECKS, golden_values
from nestedsearch.index import IndexTable, check_maxmin_identity
from nestedsearch.oracle import adversarial_battery, audit_policy, lemma1_bound, optimal_value
from nestedsearch.policy import IndexPolicy, evaluate_policy_exact
from nestedsearch.pricing import (BENCHMARK, STAGE1, MarketModel, duopoly_fixed_point, excess_split_gap,
                                  foc_residuals, hazard_dominance_gap, p_dagger, p_hat, p_star, random_market)
from nestedsearch.tree import enumerate_realizations

TOL = 1e-9
MARKETS = 200


def report(n, ok, detail):
    print(f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
    return ok


@pytest.fixture(scope="module")
def golden():
    start = time.perf_counter()
    vals = golden_values()
    return vals, time.perf_counter() - start


@pytest.fixture(scope="module")
def markets():
    rng = np.random.default_rng(7)
    families = [("uniform",), ("truncnormal",), ("uniform", "truncnormal")]
    start = time.perf_counter()
    out = [random_market(rng, families[i % 3]) for i in range(MARKETS)]
    return out, time.perf_counter() - start


def test_criterion_1_golden_values(golden):
    vals, elapsed = golden
    misses = [f"{k}={vals[k]:.6f}" for k, ref, tol in GOLDEN_CHECKS if abs(vals[k] - ref) > tol]
    ok = not misses and elapsed < 5
    detail = ", ".join(f"{k}={vals[k]:.6f}" for k, _, _ in GOLDEN_CHECKS) + f" in {elapsed:.2f}s"
    assert report(1, ok, detail), misses


def test_criterion_2_reversal(golden):
    vals, _ = golden
    ok = vals["duopoly_p_star"] > vals["duopoly_p_hat"]
    assert report(2, ok, f"p*={vals['duopoly_p_star']:.6f} > p_hat={vals['duopoly_p_hat']:.6f}")


def test_criterion_3_index_is_optimal(tree_suite):
    start = time.perf_counter()
    worst = 0.0
    for tree in tree_suite:
        worst = max(worst, abs(optimal_value(tree) - evaluate_policy_exact(tree, IndexPolicy(tree)).payoff))
    elapsed = time.perf_counter() - start
    ok = len(tree_suite) >= 100 and worst <= TOL and elapsed < 60
    assert report(3, ok, f"{len(tree_suite)} trees, worst gap {worst:.2e}, {elapsed:.1f}s")


def test_criterion_4_bound_suite(tree_suite):
    start = time.perf_counter()
    over = eq = beaten = 0.0
    for tree in tree_suite:
        table = IndexTable(tree)
        idx = IndexPolicy(tree, table)
        top = lemma1_bound(tree, idx, table)
        eq = max(eq, abs(top - evaluate_policy_exact(tree, idx).payoff))
        for pol in adversarial_battery(tree):
            b = lemma1_bound(tree, pol, table)
            over = max(over, evaluate_policy_exact(tree, pol).payoff - b)
            beaten = max(beaten, b - top)
    elapsed = time.perf_counter() - start
    ok = over <= TOL and eq <= TOL and beaten <= TOL and elapsed < 60
    assert report(4, ok, f"max payoff-bound {over:.2e}, index equality {eq:.2e}, "
                         f"max bound excess over index {beaten:.2e}, {elapsed:.1f}s")


def test_criterion_5_identities(tree_suite):
    maxmin = excess = 0.0
    for tree in tree_suite:
        table = IndexTable(tree)
        for realized, _ in enumerate_realizations(tree):
            for node in tree.nodes:
                lhs, rhs = check_maxmin_identity(tree, node, realized, table)
                maxmin = max(maxmin, abs(lhs - rhs))
        for pol in [IndexPolicy(tree, table)] + adversarial_battery(tree, seeds=2):
            excess = max(excess, audit_policy(tree, pol, table).worst_identity_gap)
    ok = maxmin <= TOL and excess <= TOL
    assert report(5, ok, f"max-min gap {maxmin:.2e}, cost-excess gap {excess:.2e}")


def test_criterion_6_order_relations(markets):
    suite, gen = markets
    start = time.perf_counter()
    worst = {k: 0.0 for k in ("sigma", "hazard", "p*<=p_hat", "p*<=p_dagger", "cs", "regulation", "split")}
    for i, m in enumerate(suite):
        ps, pd, ph = p_star(m), p_dagger(m), p_hat(m)
        viol = {
            "sigma": m.sigma_hat - m.sigma,
            "hazard": -hazard_dominance_gap(m),
            "p*<=p_hat": ps - ph,
            "p*<=p_dagger": ps - pd,
            "cs": (m.sigma_hat - ph) - (m.sigma - ps),
            "regulation": (m.sigma - pd) - (m.sigma - ps),
            "split": -excess_split_gap(m, np.random.default_rng(i), 2000),
        }
        for k, v in viol.items():
            worst[k] = max(worst[k], v)
    elapsed = time.perf_counter() - start + gen
    ok = len(suite) >= 200 and all(v <= TOL for v in worst.values()) and elapsed < 120
    assert report(6, ok, f"{len(suite)} markets, worst violations "
                         + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f", {elapsed:.1f}s")


def test_criterion_7_foc_residuals(markets):
    suite, _ = markets
    worst = 0.0
    for m in suite:
        worst = max(worst, *map(abs, foc_residuals(m).values()))
        small = MarketModel(m.F, m.G, m.c_x, m.c_y, n=2, L=1.0)
        for regime in (STAGE1, BENCHMARK):
            worst = max(worst, abs(duopoly_fixed_point(small, regime).residual))
    assert report(7, worst <= 1e-8, f"worst residual {worst:.2e} over {len(suite)} markets")


def test_criterion_8_selftest_is_byte_identical(tmp_path):
    outs = []
    for k in range(2):
        path = tmp_path / f"run{k}.json"
        proc = subprocess.run([sys.executable, "-m", "nestedsearch", "selftest", "--out", str(path)],
                              capture_output=True)
        assert proc.returncode == 0, proc.stderr.decode()
        outs.append((proc.stdout, path.read_bytes()))
    assert report(8, outs[0] == outs[1], "two selftest runs compared byte for byte")
