import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nestedsearch.dist import DiscretePMF, UniformInterval
from nestedsearch.errors import BudgetExceeded, UnsupportedOperation
from nestedsearch.index import IndexTable
from nestedsearch.oracle import (adversarial_battery, audit_policy, lemma1_bound, optimal_value,
                                 state_count_estimate, verify_optimality)
from nestedsearch.policy import ExhaustivePolicy, IndexPolicy, NeverPolicy, evaluate_policy_exact
from nestedsearch.tree import EdgeSpec, LastSignal, SearchTree, Unconditional, random_tree, single_box

seeds = st.integers(0, 2**32 - 1)


def boxes(*specs):
    nodes = {(i,): EdgeSpec(c, Unconditional(d), 0, LastSignal()) for i, (d, c) in enumerate(specs, start=1)}
    return SearchTree(len(specs), nodes)


def test_dp_small_examples(coin):
    assert optimal_value(single_box(coin, 0.25)) == pytest.approx(0.25)
    assert optimal_value(single_box(coin, 0.6)) == 0.0
    # open one box; if it pays 0, opening the other is worth 0.5 - 0.25
    assert optimal_value(boxes((coin, 0.25), (coin, 0.25))) == pytest.approx(0.375)


def test_never_policy_has_zero_bound(coin):
    tree = boxes((coin, 0.25), (coin, 0.1))
    assert lemma1_bound(tree, NeverPolicy(tree)) == 0.0


def test_all_indexes_negative_gives_zero():
    d = DiscretePMF.from_pairs([(-2.0, 0.5), (-1.0, 0.5)])
    tree = boxes((d, 0.1), (d, 0.2))
    rep = verify_optimality(tree, seeds=3)
    assert rep.optimal_value == 0.0 and rep.index_value == 0.0 and rep.passed


def test_budget(coin):
    tree = boxes(*[(coin, 0.1)] * 6)
    assert state_count_estimate(tree) == 3**6
    with pytest.raises(BudgetExceeded):
        optimal_value(tree, budget=100)


def test_continuous_rejected(unit):
    with pytest.raises(UnsupportedOperation):
        optimal_value(single_box(unit, 0.1))


@given(st.lists(st.tuples(st.floats(0, 2), st.floats(0.1, 0.9), st.floats(0, 2), st.floats(0.01, 0.6)),
                min_size=1, max_size=3))
def test_reservation_value_rule_is_optimal(specs):
    tree = boxes(*[(DiscretePMF.from_pairs([(a, p), (b if b != a else a + 1, 1 - p)]), c) for a, p, b, c in specs])
    pol = IndexPolicy(tree)
    assert evaluate_policy_exact(tree, pol).payoff == pytest.approx(optimal_value(tree), abs=1e-9)


@given(seeds)
def test_random_trees(seed):
    rep = verify_optimality(random_tree(np.random.default_rng(seed)), seeds=4)
    assert rep.gap <= 1e-9
    assert rep.bound_gap <= 1e-9
    assert rep.payoff_within_bound and rep.bound_maximized


@given(seeds)
def test_two_bound_routes_agree(seed):
    tree = random_tree(np.random.default_rng(seed))
    table = IndexTable(tree)
    for pol in [IndexPolicy(tree, table)] + adversarial_battery(tree, seeds=2):
        audit = audit_policy(tree, pol, table)
        assert audit.bound == pytest.approx(lemma1_bound(tree, pol, table), abs=1e-9)
        assert audit.payoff == pytest.approx(evaluate_policy_exact(tree, pol).payoff, abs=1e-9)


def test_exhaustive_worst_stays_below_bound(coin):
    tree = boxes((coin, 0.1), (coin, 0.1))
    pol = ExhaustivePolicy(tree, worst=True)
    assert evaluate_policy_exact(tree, pol).payoff <= lemma1_bound(tree, pol) + 1e-12


def test_report_dict(coin):
    d = verify_optimality(single_box(coin, 0.25), seeds=2).as_dict()
    assert d["passed"] and len(d["battery"]) == 7
