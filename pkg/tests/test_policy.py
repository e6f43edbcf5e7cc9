import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nestedsearch.dist import DiscretePMF
from nestedsearch.errors import ValidationError
from nestedsearch.oracle import audit_policy
from nestedsearch.policy import (Claim, Inspect, IndexPolicy, NeverPolicy, RandomPolicy, SearchState,
                                 TakeOutsideOption, evaluate_policy_exact, make_policy, run_policy, simulate)
from nestedsearch.tree import AdditiveSum, EdgeSpec, LastSignal, SearchTree, Unconditional, random_tree, single_box

seeds = st.integers(0, 2**32 - 1)


def test_single_box_payoffs(unit, coin):
    assert evaluate_policy_exact(single_box(coin, 0.25), IndexPolicy(single_box(coin, 0.25))).payoff == \
        pytest.approx(0.25)
    tree = single_box(coin, 0.25)
    assert evaluate_policy_exact(tree, NeverPolicy(tree)).payoff == 0.0
    dear = single_box(coin, 0.6)
    ev = evaluate_policy_exact(dear, IndexPolicy(dear))
    assert ev.payoff == 0.0 and not ev.inspect_prob


def test_index_policy_steps(coin):
    tree = single_box(coin, 0.25)
    pol = IndexPolicy(tree)
    s0 = SearchState.initial(tree)
    assert pol(s0) == Inspect((1,))
    assert pol(s0.inspect(tree, (1,), 1.0)) == Claim((1,))
    assert pol(s0.inspect(tree, (1,), 0.0)) == Claim((1,))  # zero prize ties the outside option


def test_negative_prize_falls_back_to_outside():
    d = DiscretePMF.from_pairs([(-1.0, 0.5), (2.0, 0.5)])
    tree = single_box(d, 0.1)
    trace = run_policy(tree, IndexPolicy(tree), {(1,): -1.0})
    assert trace.actions[-1] == TakeOutsideOption()
    assert trace.payoff == pytest.approx(-0.1)


def test_inner_node_must_be_opened_first(coin):
    tree = SearchTree(1, {
        (1,): EdgeSpec(0.1, Unconditional(coin), 1, None),
        (1, 1): EdgeSpec(0.1, Unconditional(coin), 0, AdditiveSum()),
    })
    s0 = SearchState.initial(tree)
    assert s0.frontier(tree) == ((1,),)
    assert s0.inspect(tree, (1,), 1.0).frontier(tree) == ((1, 1),)
    with pytest.raises(ValidationError):
        run_policy(tree, lambda s: Inspect((1, 1)), {(1,): 0.0, (1, 1): 0.0})
    with pytest.raises(ValidationError):
        run_policy(tree, lambda s: Claim((1,)), {(1,): 0.0, (1, 1): 0.0})


def test_recall_is_free(coin):
    tree = SearchTree(2, {
        (1,): EdgeSpec(0.1, Unconditional(coin), 0, LastSignal()),
        (2,): EdgeSpec(0.1, Unconditional(coin), 0, LastSignal()),
    })
    script = iter([Inspect((1,)), Inspect((2,)), Claim((1,))])
    trace = run_policy(tree, lambda s: next(script), {(1,): 1.0, (2,): 0.0})
    assert trace.payoff == pytest.approx(0.8)


def test_ties_go_to_the_smaller_path(coin):
    tree = SearchTree(2, {
        (1,): EdgeSpec(0.1, Unconditional(coin), 0, LastSignal()),
        (2,): EdgeSpec(0.1, Unconditional(coin), 0, LastSignal()),
    })
    assert IndexPolicy(tree)(SearchState.initial(tree)) == Inspect((1,))


def test_deterministic_box_simulates_exactly():
    tree = single_box(DiscretePMF.point(1.0), 0.0)
    res = simulate(tree, IndexPolicy(tree), draws=50, seed=1)
    assert res.mean == 1.0 and res.stderr == 0.0


@given(seeds)
def test_simulation_agrees_with_exact(seed):
    tree = random_tree(np.random.default_rng(seed))
    pol = IndexPolicy(tree)
    exact = evaluate_policy_exact(tree, pol).payoff
    res = simulate(tree, pol, draws=2000, seed=seed % 1000)
    assert abs(res.mean - exact) <= 5 * res.stderr + 1e-12


def test_simulation_is_deterministic(coin):
    tree = single_box(coin, 0.2)
    a = simulate(tree, IndexPolicy(tree), draws=500, seed=7, trace=3)
    b = simulate(tree, IndexPolicy(tree), draws=500, seed=7, trace=3)
    assert a == b
    with pytest.raises(ValidationError):
        simulate(tree, IndexPolicy(tree), draws=0)


def test_continuous_simulation(unit):
    tree = single_box(unit, 0.125)
    res = simulate(tree, IndexPolicy(tree), draws=4000, seed=3)
    # always open, always claim: E[X] - c
    assert res.mean == pytest.approx(0.375, abs=5 * res.stderr)


@given(seeds, st.sampled_from(["index", "greedy", "depth_first", "random", "exhaustive_best"]))
def test_cost_equals_expected_excess(seed, name):
    tree = random_tree(np.random.default_rng(seed))
    audit = audit_policy(tree, make_policy(name, tree, seed=seed % 97))
    assert audit.worst_identity_gap <= 1e-9


def test_random_policy_is_a_function_of_state(coin):
    tree = single_box(coin, 0.2)
    s = SearchState.initial(tree)
    assert RandomPolicy(tree, 5)(s) == RandomPolicy(tree, 5)(s)


def test_unknown_policy():
    with pytest.raises(ValidationError):
        make_policy("clairvoyant", single_box(DiscretePMF.point(1.0), 0.1))
