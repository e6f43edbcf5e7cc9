"""Node indexes and capped values, computed backwards from the boxes.

For a node with cost ``c`` and realized ancestor signals ``a``, the index
``sigma`` solves ``E[(M - sigma)^+ | a] = c`` where ``M`` is the largest capped
value among the node's children (for a box, its prize).  The node's own capped
value is ``min(sigma, M)``.

Discrete trees are handled exactly: the law of every capped value is carried
as a finite PMF.  Trees with continuous signals are supported when all
kernels are unconditional and all prizes are of one kind (path sum or last
signal); indexes are then a fixed offset from the ancestor sum (or constant)
and the offsets come from a seeded Monte Carlo recursion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dist import DiscretePMF, pmf_max, pmf_min_const, pmf_mixture, _solve_threshold_pmf, solve_threshold
from .errors import UnsupportedOperation, ValidationError
from .tree import AdditiveSum, LastSignal, Unconditional, path_str

MC_DRAWS = 2**20


def index_from_law(law, cost):
    """Solve E[(M - s)^+] = cost for s; returns (s, degenerate).

    A zero cost makes every s above the top of M's support a solution; the
    smallest one is returned and flagged.
    """
    if cost == 0:
        return float(law.upper), True
    full = law.mean - law.lower
    if cost >= full:
        # below the support E[(M - s)^+] = E[M] - s
        return float(law.mean - cost), False
    if law.is_discrete:
        return _solve_threshold_pmf(law, cost), False
    return solve_threshold(law, cost), False


@dataclass(frozen=True)
class IndexEntry:
    node: tuple
    ancestors: tuple
    sigma: float
    degenerate: bool


class IndexTable:
    """Lazily computed indexes for every (node, ancestor realization) pair."""

    def __init__(self, tree, draws=MC_DRAWS, seed=0):
        self.tree = tree
        self.draws = int(draws)
        self.seed = seed
        self._sigma = {}
        self._kappa_law = {}
        self._conditional = {}
        self._degenerate = set()
        self._relative = None
        if not tree.is_discrete:
            self._prepare_continuous()

    # -- discrete -------------------------------------------------------
    def child_max_law(self, node, ancestors):
        """Law of the largest child capped value, given the node's ancestors."""
        tree = self.tree
        ancestors = tuple(ancestors)
        kernel = tree.kernel(node, ancestors)
        parts = []
        for x in kernel.values:
            path = (*ancestors, float(x))
            if tree.is_terminal(node):
                parts.append(DiscretePMF.point(tree.nodes[node].value(path)))
            else:
                parts.append(pmf_max([self.kappa_law(ch, path) for ch in tree.children(node)]))
        return pmf_mixture(kernel.probs, parts)

    def kappa_law(self, node, ancestors):
        key = (node, tuple(ancestors))
        if key not in self._kappa_law:
            self._solve_discrete(*key)
        return self._kappa_law[key]

    def _solve_discrete(self, node, ancestors):
        law = self.child_max_law(node, ancestors)
        sigma, degenerate = index_from_law(law, self.tree.cost(node))
        self._sigma[node, ancestors] = sigma
        if degenerate:
            self._degenerate.add((node, ancestors))
        self._kappa_law[node, ancestors] = pmf_min_const(law, sigma)

    # -- continuous -----------------------------------------------------
    def _prepare_continuous(self):
        tree = self.tree
        if not all(isinstance(e.kernel, Unconditional) for e in tree.nodes.values()):
            raise UnsupportedOperation("continuous trees need unconditional kernels")
        kinds = {type(tree.nodes[t].value) for t in tree.terminals}
        if len(kinds) != 1 or kinds.pop() not in (AdditiveSum, LastSignal):
            raise UnsupportedOperation("continuous trees need all prizes to be path sums, or all last signals")
        self._additive = isinstance(tree.nodes[tree.terminals[0]].value, AdditiveSum)
        rng = np.random.default_rng(self.seed)
        self._relative = {}
        for node in tree.children(()):
            self._relative_samples(node, rng)

    def _relative_samples(self, node, rng):
        tree = self.tree
        dist = tree.kernel(node)
        terminal = tree.is_terminal(node)
        own = self._additive or terminal
        if terminal:
            if tree.cost(node) == 0:
                rel, degenerate = float(dist.upper), True
            else:
                rel, degenerate = index_from_law(dist, tree.cost(node))
            reach = dist.sample(rng, self.draws)
        else:
            kids = [self._relative_samples(ch, rng) for ch in tree.children(node)]
            reach = np.max(np.stack(kids), axis=0)
            if own:
                reach = reach + dist.sample(rng, self.draws)
            rel, degenerate = index_from_law(DiscretePMF.empirical(reach), tree.cost(node))
        self._relative[node] = rel
        if degenerate:
            self._degenerate.add((node, ()))
        return np.minimum(rel, reach)

    def _shift(self, ancestors):
        return math.fsum(ancestors) if self._additive else 0.0

    # -- public ---------------------------------------------------------
    def sigma(self, node, ancestors=()):
        ancestors = tuple(float(a) for a in ancestors)
        if len(ancestors) != len(node) - 1:
            raise ValidationError(f"{path_str(node)} has {len(node) - 1} strict ancestors, "
                                  f"got {len(ancestors)} values")
        if self._relative is not None:
            return self._shift(ancestors) + self._relative[node]
        key = (node, ancestors)
        if key not in self._sigma:
            self._solve_discrete(*key)
        return self._sigma[key]

    def is_degenerate(self, node, ancestors=()):
        if self._relative is not None:
            return (node, ()) in self._degenerate
        self.sigma(node, ancestors)
        return (node, tuple(ancestors)) in self._degenerate

    def kappa(self, node, realized):
        """Capped value of ``node`` given realizations of its ancestors and whole subtree."""
        tree = self.tree
        try:
            anc = tree.ancestor_values(node, realized)
            sigma = self.sigma(node, anc)
            if tree.is_terminal(node):
                return min(sigma, tree.prize(node, realized))
            return min(sigma, max(self.kappa(ch, realized) for ch in tree.children(node)))
        except KeyError as exc:
            raise ValidationError(f"missing realization for node {path_str(exc.args[0])}") from None

    def conditional_kappa_law(self, node, realized):
        """Law of the capped value given only the realizations in ``realized``.

        Uninspected subtrees are independent of everything else given their
        ancestors, so their unconditional laws are reused.
        """
        tree = self.tree
        anc = tree.ancestor_values(node, realized)
        if node not in realized:
            return self.kappa_law(node, anc)
        depth = len(node)
        key = (node, anc, tuple(sorted((n, v) for n, v in realized.items() if n[:depth] == node)))
        if key in self._conditional:
            return self._conditional[key]
        self._conditional[key] = law = self._conditional_law(node, anc, realized)
        return law

    def _conditional_law(self, node, anc, realized):
        tree = self.tree
        sigma = self.sigma(node, anc)
        if tree.is_terminal(node):
            return DiscretePMF.point(min(sigma, tree.prize(node, realized)))
        law = pmf_max([self.conditional_kappa_law(ch, realized) for ch in tree.children(node)])
        return pmf_min_const(law, sigma)

    def entries(self):
        """Every reachable (node, ancestors) index of a discrete tree, in path order."""
        tree = self.tree
        if self._relative is not None:
            return [IndexEntry(n, (), self._relative[n], (n, ()) in self._degenerate) for n in tree.nodes]
        out = []
        prefixes = {(): [()]}
        for node in tree.nodes:
            parent = node[:-1]
            if parent:
                pp = prefixes[parent]
                prefixes[node] = [(*p, float(v)) for p in pp for v in tree.kernel(parent, p).values]
            else:
                prefixes[node] = [()]
            for anc in prefixes[node]:
                out.append(IndexEntry(node, anc, self.sigma(node, anc), self.is_degenerate(node, anc)))
        return out

    @property
    def offset_rule(self):
        if self._relative is None:
            return None
        return "ancestor-sum" if self._additive else "constant"


def node_index(tree, node, ancestors=(), table=None):
    """Index of ``node`` given the realized signals of its strict ancestors."""
    table = table or IndexTable(tree)
    return table.sigma(node, ancestors)


def capped_value(tree, node, realized, table=None):
    table = table or IndexTable(tree)
    return table.kappa(node, realized)


def check_maxmin_identity(tree, node, realized, table=None):
    """Both sides of the path identity, computed independently.

    Left: the minimum of the strict ancestors' indexes and the node's capped
    value.  Right: over boxes below the node, the best of the minimum index
    along the box's path (its prize standing in for the last index).
    """
    table = table or IndexTable(tree)
    sig = {}

    def sigma_at(n):
        if n not in sig:
            sig[n] = table.sigma(n, tree.ancestor_values(n, realized))
        return sig[n]

    lhs = min([sigma_at(a) for a in tree.strict_ancestors(node)] + [table.kappa(node, realized)])
    best = -math.inf
    for t in tree.terminal_descendants(node):
        path = [t[:k] for k in range(1, len(t) + 1)]
        best = max(best, min([sigma_at(n) for n in path] + [tree.prize(t, realized)]))
    return lhs, best
