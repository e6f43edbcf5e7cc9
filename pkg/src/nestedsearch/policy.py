"""Search states, policies, and exact or simulated policy evaluation."""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass, field

import numpy as np

from .errors import UnsupportedOperation, ValidationError
from .index import IndexTable
from .tree import ROOT, enumerate_realizations, path_str, sample_realizations

# --------------------------------------------------------------------------
# state and actions


@dataclass(frozen=True)
class SearchState:
    """Inspected nodes with their signals, and the total cost paid so far.

    The frontier and the best opened box are carried along so that each
    inspection updates them in constant time; they do not enter equality.
    """

    realized: tuple = ()
    spent: float = 0.0
    frontier_nodes: tuple = field(default=None, compare=False, repr=False)
    best: tuple = field(default=(None, -math.inf), compare=False, repr=False)

    @classmethod
    def initial(cls, tree):
        return cls((), 0.0, tuple(tree.children(ROOT)))

    @property
    def realized_map(self):
        return dict(self.realized)

    @property
    def inspected(self):
        return frozenset(n for n, _ in self.realized)

    @property
    def key(self):
        return self.realized

    def inspect(self, tree, node, value, cost=None):
        """State after paying for ``node`` and observing ``value`` (cost defaults to the node's)."""
        value = float(value)
        items = tuple(sorted((*self.realized, (node, value))))
        frontier = self.frontier(tree)
        if node in frontier:
            frontier = tuple(sorted([n for n in frontier if n != node] + list(tree.children(node))))
        best = self.best
        if tree.is_terminal(node):
            realized = dict(items)
            if all(a in realized for a in tree.strict_ancestors(node)):
                prize = tree.prize(node, realized)
                if prize > best[1] or (prize == best[1] and node < best[0]):
                    best = (node, prize)
        spent = self.spent + (tree.cost(node) if cost is None else cost)
        return SearchState(items, spent, frontier, best)

    def frontier(self, tree):
        """Uninspected nodes whose parent is the root or an inspected node."""
        if self.frontier_nodes is not None:
            return self.frontier_nodes
        seen = self.inspected
        out = [n for n in tree.children(ROOT) if n not in seen]
        for n in seen:
            if not tree.is_terminal(n):
                out.extend(ch for ch in tree.children(n) if ch not in seen)
        return tuple(sorted(out))

    def claimable(self, tree):
        return sorted(n for n in self.inspected if tree.is_terminal(n))

    def best_claim(self, tree):
        """(box, prize) of the best opened box, ties to the smallest path; (None, -inf) if none."""
        if self.frontier_nodes is not None:
            return self.best
        realized = self.realized_map
        best, prize = None, -math.inf
        for t in self.claimable(tree):
            v = tree.prize(t, realized)
            if v > prize:
                best, prize = t, v
        return best, prize


@dataclass(frozen=True)
class Inspect:
    node: tuple

    def __str__(self):
        return f"inspect {path_str(self.node)}"


@dataclass(frozen=True)
class Claim:
    node: tuple

    def __str__(self):
        return f"claim {path_str(self.node)}"


@dataclass(frozen=True)
class TakeOutsideOption:
    def __str__(self):
        return "outside"


def _stop(tree, state):
    box, prize = state.best_claim(tree)
    return Claim(box) if box is not None and prize >= 0 else TakeOutsideOption()


# --------------------------------------------------------------------------
# policies


def index_policy_step(tree, table, state):
    """Inspect the top-index frontier node if its index beats every stopping payoff."""
    realized = state.realized_map
    top, chosen = -math.inf, None
    for n in state.frontier(tree):
        s = table.sigma(n, tree.ancestor_values(n, realized))
        if s > top:
            top, chosen = s, n
    _, prize = state.best_claim(tree)
    if chosen is not None and top > max(prize, 0.0):
        return Inspect(chosen)
    return _stop(tree, state)


class IndexPolicy:
    name = "index"

    def __init__(self, tree, table=None):
        self.tree = tree
        self.table = table or IndexTable(tree)

    def __call__(self, state):
        return index_policy_step(self.tree, self.table, state)


class NeverPolicy:
    """Takes the outside option immediately."""

    name = "never"

    def __init__(self, tree):
        self.tree = tree

    def __call__(self, state):
        return TakeOutsideOption()


class GreedyPolicy:
    """Inspects the frontier node with the best immediate mean signal net of cost."""

    name = "greedy"

    def __init__(self, tree):
        self.tree = tree

    def __call__(self, state):
        tree, realized = self.tree, state.realized_map
        top, chosen = -math.inf, None
        for n in state.frontier(tree):
            score = tree.kernel(n, tree.ancestor_values(n, realized)).mean - tree.cost(n)
            if score > top:
                top, chosen = score, n
        _, prize = state.best_claim(tree)
        if chosen is not None and top > max(prize, 0.0):
            return Inspect(chosen)
        return _stop(tree, state)


class DepthFirstPolicy:
    """Dives to the deepest frontier node until some box pays a nonnegative prize."""

    name = "depth_first"

    def __init__(self, tree):
        self.tree = tree

    def __call__(self, state):
        box, prize = state.best_claim(self.tree)
        if box is not None and prize >= 0:
            return Claim(box)
        frontier = state.frontier(self.tree)
        if frontier:
            return Inspect(max(frontier, key=lambda n: (len(n), tuple(-i for i in n))))
        return TakeOutsideOption()


class ExhaustivePolicy:
    """Inspects everything, then claims the best (or worst) box."""

    def __init__(self, tree, worst=False):
        self.tree = tree
        self.worst = worst
        self.name = "exhaustive_worst" if worst else "exhaustive_best"

    def __call__(self, state):
        frontier = state.frontier(self.tree)
        if frontier:
            return Inspect(frontier[0])
        if self.worst:
            realized = state.realized_map
            boxes = state.claimable(self.tree)
            return Claim(min(boxes, key=lambda t: (self.tree.prize(t, realized), t)))
        return _stop(self.tree, state)


class RandomPolicy:
    """Uniform choice among all legal actions, a pure function of (seed, state)."""

    def __init__(self, tree, seed=0):
        self.tree = tree
        self.seed = int(seed)
        self.name = f"random[{self.seed}]"

    def __call__(self, state):
        digest = hashlib.blake2b(repr((self.seed, state.key)).encode(), digest_size=8).digest()
        rng = random.Random(int.from_bytes(digest, "little"))
        options = [Inspect(n) for n in state.frontier(self.tree)]
        options += [Claim(t) for t in state.claimable(self.tree)] + [TakeOutsideOption()]
        return options[rng.randrange(len(options))]


POLICY_NAMES = ("index", "greedy", "depth_first", "random", "never", "exhaustive_best", "exhaustive_worst")


def make_policy(name, tree, seed=0, table=None):
    if name == "index":
        return IndexPolicy(tree, table)
    if name == "greedy":
        return GreedyPolicy(tree)
    if name == "depth_first":
        return DepthFirstPolicy(tree)
    if name == "random":
        return RandomPolicy(tree, seed)
    if name == "never":
        return NeverPolicy(tree)
    if name == "exhaustive_best":
        return ExhaustivePolicy(tree)
    if name == "exhaustive_worst":
        return ExhaustivePolicy(tree, worst=True)
    raise ValidationError(f"unknown policy {name!r}; choose from {', '.join(POLICY_NAMES)}")


# --------------------------------------------------------------------------
# running and evaluating


@dataclass(frozen=True)
class PolicyTrace:
    actions: tuple
    payoff: float
    spent: float
    claimed: tuple | None
    inspected: frozenset = field(default_factory=frozenset)

    def as_dict(self):
        return {
            "actions": [str(a) for a in self.actions],
            "payoff": self.payoff,
            "spent": self.spent,
            "claimed": None if self.claimed is None else path_str(self.claimed),
        }


def _apply(tree, state, action, value_of):
    if not isinstance(action, Inspect):
        raise ValidationError(f"not an inspection: {action!r}")
    if action.node not in state.frontier(tree):
        raise ValidationError(f"illegal inspection of {path_str(action.node)}")
    return state.inspect(tree, action.node, value_of(action.node))


def _finish(tree, state, action):
    if isinstance(action, Claim):
        if action.node not in state.inspected or not tree.is_terminal(action.node):
            raise ValidationError(f"illegal claim of {path_str(action.node)}")
        return tree.prize(action.node, state.realized_map) - state.spent
    if isinstance(action, TakeOutsideOption):
        return -state.spent
    raise ValidationError(f"unknown action {action!r}")


def run_policy(tree, policy, realized):
    """Play ``policy`` against one full realization."""
    state, actions = SearchState.initial(tree), []
    while True:
        action = policy(state)
        actions.append(action)
        if isinstance(action, Inspect):
            state = _apply(tree, state, action, realized.__getitem__)
            continue
        payoff = _finish(tree, state, action)
        claimed = action.node if isinstance(action, Claim) else None
        return PolicyTrace(tuple(actions), payoff, state.spent, claimed, state.inspected)


@dataclass(frozen=True)
class ExactEvaluation:
    payoff: float
    claim_prob: dict
    inspect_prob: dict


def evaluate_policy_exact(tree, policy, on_leaf=None):
    """Expected payoff by walking the policy's decision tree over signal outcomes.

    ``on_leaf(state, action, weight)`` is called at every terminal decision.
    """
    if not tree.is_discrete:
        raise UnsupportedOperation("exact evaluation needs a discrete tree")
    claim, inspect = {}, {}
    total = [0.0]

    def walk(state, weight):
        action = policy(state)
        if isinstance(action, Inspect):
            n = action.node
            if n not in state.frontier(tree):
                raise ValidationError(f"illegal inspection of {path_str(n)}")
            inspect[n] = inspect.get(n, 0.0) + weight
            d = tree.kernel(n, tree.ancestor_values(n, state.realized_map))
            for v, q in zip(d.values, d.probs):
                walk(state.inspect(tree, n, v), weight * float(q))
            return
        total[0] += weight * _finish(tree, state, action)
        if isinstance(action, Claim):
            claim[action.node] = claim.get(action.node, 0.0) + weight
        if on_leaf is not None:
            on_leaf(state, action, weight)

    walk(SearchState.initial(tree), 1.0)
    return ExactEvaluation(total[0], claim, inspect)


@dataclass(frozen=True)
class SimulationResult:
    mean: float
    stderr: float
    draws: int
    seed: int
    traces: tuple = ()

    def as_dict(self):
        return {"mean": self.mean, "stderr": self.stderr, "draws": self.draws, "seed": self.seed,
                "traces": [t.as_dict() for t in self.traces]}


def simulate(tree, policy, draws=10_000, seed=0, trace=0):
    """Monte Carlo payoff of ``policy``; identical seeds give identical results."""
    draws = int(draws)
    if draws < 1:
        raise ValidationError("draws must be positive")
    rng = np.random.default_rng(seed)
    traces = []
    if tree.is_discrete:
        outcomes = enumerate_realizations(tree)
        probs = np.array([p for _, p in outcomes])
        idx = rng.choice(len(outcomes), size=draws, p=probs / probs.sum())
        cache = {}
        payoffs = np.empty(draws)
        for k, i in enumerate(idx.tolist()):
            if i not in cache:
                cache[i] = run_policy(tree, policy, outcomes[i][0])
            payoffs[k] = cache[i].payoff
            if k < trace:
                traces.append(cache[i])
    else:
        samples = sample_realizations(tree, rng, draws)
        payoffs = np.empty(draws)
        for k in range(draws):
            realized = {n: float(v[k]) for n, v in samples.items()}
            t = run_policy(tree, policy, realized)
            payoffs[k] = t.payoff
            if k < trace:
                traces.append(t)
    mean = float(np.mean(payoffs))
    stderr = float(np.std(payoffs, ddof=1) / math.sqrt(draws)) if draws > 1 else 0.0
    return SimulationResult(mean, stderr, draws, int(seed), tuple(traces))
