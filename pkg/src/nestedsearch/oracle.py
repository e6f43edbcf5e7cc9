"""Brute-force checks of the index policy on small discrete trees.

``optimal_value`` is a memoized backward induction over search states.  The
payoff bound is computed two ways: from the policy's decision tree with
conditional capped-value laws (fast), and by playing the policy against every
full realization (independent, used for the identity checks).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import BudgetExceeded, UnsupportedOperation
from .index import IndexTable
from .policy import (Claim, DepthFirstPolicy, ExhaustivePolicy, GreedyPolicy, IndexPolicy, NeverPolicy,
                     RandomPolicy, evaluate_policy_exact, run_policy)
from .tree import ROOT, enumerate_realizations

DEFAULT_BUDGET = 10_000_000
TOL = 1e-9


def _require_discrete(tree):
    if not tree.is_discrete:
        raise UnsupportedOperation("the oracle needs a discrete tree")


def state_count_estimate(tree):
    """Upper bound on the number of distinct search states.

    A subtree contributes 1 (root uninspected) plus, for each signal value,
    the product over its children's subtrees.
    """
    def support(node):
        return max(len(d.values) for d in tree.nodes[node].kernel.distributions())

    def g(node):
        inner = 1
        for ch in tree.children(node):
            inner *= g(ch)
        return 1 + support(node) * inner

    total = 1
    for ch in tree.children(ROOT):
        total *= g(ch)
    return total


def optimal_value(tree, budget=DEFAULT_BUDGET):
    """Value of the best adaptive policy, by memoized backward induction."""
    _require_discrete(tree)
    estimate = state_count_estimate(tree)
    if estimate > budget:
        raise BudgetExceeded(f"about {estimate} states exceed the budget of {int(budget)}", estimate=estimate)
    # nodes are addressed by ordinal; a state is the tuple of realized values
    # (None where uninspected), which is canonical for memoization
    order = list(tree.nodes)
    pos = {n: i for i, n in enumerate(order)}
    ancestors = [[pos[a] for a in tree.strict_ancestors(n)] for n in order]
    kids = [[pos[c] for c in tree.children(n)] for n in order]
    terminal = [tree.is_terminal(n) for n in order]
    costs = [tree.cost(n) for n in order]
    laws, prizes, memo = {}, {}, {}

    def law(j, anc):
        key = (j, anc)
        if key not in laws:
            d = tree.kernel(order[j], anc)
            laws[key] = list(zip(map(float, d.values), map(float, d.probs)))
        return laws[key]

    def prize(j, path):
        key = (j, path)
        if key not in prizes:
            prizes[key] = tree.nodes[order[j]].value(path)
        return prizes[key]

    def value(vals, frontier, best):
        if vals in memo:
            return memo[vals]
        out = max(best, 0.0)
        for j in frontier:
            anc = tuple(vals[a] for a in ancestors[j])
            rest = tuple(f for f in frontier if f != j)
            if not terminal[j]:
                rest += tuple(kids[j])
            cont = -costs[j]
            for v, q in law(j, anc):
                nxt = vals[:j] + (v,) + vals[j + 1:]
                b = max(best, prize(j, (*anc, v))) if terminal[j] else best
                cont += q * value(nxt, rest, b)
            out = max(out, cont)
        memo[vals] = out
        return out

    return value((None,) * len(order), tuple(pos[c] for c in tree.children(ROOT)), -math.inf)


def lemma1_bound(tree, policy, table=None):
    """E[sum over root children l of (claim in subtree l) * kappa_l] under ``policy``."""
    _require_discrete(tree)
    table = table or getattr(policy, "table", None) or IndexTable(tree)
    acc = [0.0]

    def on_leaf(state, action, weight):
        if isinstance(action, Claim):
            top = action.node[:1]
            acc[0] += weight * table.conditional_kappa_law(top, state.realized_map).mean

    evaluate_policy_exact(tree, policy, on_leaf)
    return acc[0]


@dataclass(frozen=True)
class PolicyAudit:
    """Expectations over all full realizations for one policy."""

    payoff: float
    bound: float
    cost_side: dict
    excess_side: dict

    @property
    def worst_identity_gap(self):
        keys = set(self.cost_side) | set(self.excess_side)
        return max((abs(self.cost_side.get(k, 0.0) - self.excess_side.get(k, 0.0)) for k in keys), default=0.0)


def audit_policy(tree, policy, table=None):
    """Payoff, bound and both sides of the cost-excess identity, by full enumeration."""
    _require_discrete(tree)
    table = table or getattr(policy, "table", None) or IndexTable(tree)
    payoff = bound = 0.0
    cost_side, excess_side = {}, {}
    for realized, prob in enumerate_realizations(tree):
        trace = run_policy(tree, policy, realized)
        payoff += prob * trace.payoff
        if trace.claimed is not None:
            bound += prob * table.kappa(trace.claimed[:1], realized)
        for n in trace.inspected:
            sigma = table.sigma(n, tree.ancestor_values(n, realized))
            if tree.is_terminal(n):
                top = tree.prize(n, realized)
            else:
                top = max(table.kappa(ch, realized) for ch in tree.children(n))
            cost_side[n] = cost_side.get(n, 0.0) + prob * tree.cost(n)
            excess_side[n] = excess_side.get(n, 0.0) + prob * max(top - sigma, 0.0)
    return PolicyAudit(payoff, bound, cost_side, excess_side)


def adversarial_battery(tree, seeds=20):
    """Non-index policies used to probe the bound and its maximization."""
    out = [GreedyPolicy(tree), DepthFirstPolicy(tree), NeverPolicy(tree),
           ExhaustivePolicy(tree), ExhaustivePolicy(tree, worst=True)]
    out += [RandomPolicy(tree, s) for s in range(seeds)]
    return out


@dataclass(frozen=True)
class BatteryRow:
    policy: str
    payoff: float
    bound: float


@dataclass(frozen=True)
class OptimalityReport:
    optimal_value: float
    index_value: float
    index_bound: float
    gap: float
    battery: tuple = field(default=(), repr=False)

    @property
    def bound_gap(self):
        return abs(self.index_bound - self.index_value)

    @property
    def payoff_within_bound(self):
        return all(row.payoff <= row.bound + TOL for row in self.battery)

    @property
    def bound_maximized(self):
        return all(row.bound <= self.index_bound + TOL for row in self.battery)

    @property
    def passed(self):
        return (self.gap <= TOL and self.bound_gap <= TOL and self.payoff_within_bound
                and self.bound_maximized)

    def as_dict(self):
        return {
            "passed": self.passed,
            "optimal_value": self.optimal_value,
            "index_value": self.index_value,
            "gap": self.gap,
            "index_bound": self.index_bound,
            "payoff_within_bound": self.payoff_within_bound,
            "bound_maximized": self.bound_maximized,
            "battery": [{"policy": r.policy, "payoff": r.payoff, "bound": r.bound} for r in self.battery],
        }


def verify_optimality(tree, budget=DEFAULT_BUDGET, seeds=20):
    """Compare the index policy with the DP optimum and probe the bound with a policy battery."""
    _require_discrete(tree)
    opt = optimal_value(tree, budget)
    table = IndexTable(tree)
    idx = IndexPolicy(tree, table)
    value = evaluate_policy_exact(tree, idx).payoff
    bound = lemma1_bound(tree, idx, table)
    rows = []
    for pol in adversarial_battery(tree, seeds):
        rows.append(BatteryRow(pol.name, evaluate_policy_exact(tree, pol).payoff, lemma1_bound(tree, pol, table)))
    return OptimalityReport(opt, value, bound, abs(opt - value), tuple(rows))
