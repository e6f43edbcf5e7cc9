"""Nested search instances: a rooted tree of costly inspections.

Nodes are addressed by 1-based paths, ``()`` being the root.  Each non-root
node carries the cost of inspecting it and the law of its signal (possibly
conditional on the realized signals of its strict ancestors); terminal nodes
additionally carry the prize as a function of the signals on their path.

File format (JSON, canonical order)::

    {"children": 2,
     "nodes": {"1":   {"children": 2, "cost": 0.1, "kernel": {"pmf": [[0, 0.5], [1, 0.5]]}},
               "1.1": {"children": 0, "cost": 0.1, "kernel": {"uniform": [0, 1]}, "value": "sum"},
               ...}}

Kernels are distribution literals or ``{"table": [[[ancestor values...], literal], ...]}``;
values are ``"sum"``, ``"last"`` or ``{"table": [[[path values...], prize], ...]}``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .dist import DiscretePMF, Distribution, distribution_literal, parse_distribution
from .errors import UnsupportedOperation, ValidationError

ROOT = ()


def path_str(node):
    return ".".join(map(str, node)) if node else "root"


def parse_path(key):
    parts = key.split(".")
    if not parts or not all(p.isdigit() and not p.startswith("0") for p in parts):
        raise ValueError(key)
    return tuple(int(p) for p in parts)


# --------------------------------------------------------------------------
# kernels and terminal values


@dataclass(frozen=True)
class Unconditional:
    dist: Distribution

    def get(self, ancestors):
        return self.dist

    @property
    def is_discrete(self):
        return self.dist.is_discrete

    def distributions(self):
        return [self.dist]


@dataclass(frozen=True, eq=False)
class ConditionalTable:
    """Law of the signal for each vector of ancestor realizations."""

    table: dict

    def get(self, ancestors):
        try:
            return self.table[tuple(ancestors)]
        except KeyError:
            raise ValidationError(f"no kernel entry for ancestor realization {tuple(ancestors)}") from None

    @property
    def is_discrete(self):
        return all(d.is_discrete for d in self.table.values())

    def distributions(self):
        return list(self.table.values())


class AdditiveSum:
    name = "sum"

    def __call__(self, path_values):
        return float(math.fsum(path_values))

    def __eq__(self, other):
        return isinstance(other, AdditiveSum)

    def __hash__(self):
        return hash(self.name)

    def __repr__(self):
        return "AdditiveSum()"


class LastSignal:
    name = "last"

    def __call__(self, path_values):
        return float(path_values[-1])

    def __eq__(self, other):
        return isinstance(other, LastSignal)

    def __hash__(self):
        return hash(self.name)

    def __repr__(self):
        return "LastSignal()"


@dataclass(frozen=True, eq=False)
class ValueTable:
    table: dict
    name = "table"

    def __call__(self, path_values):
        try:
            return float(self.table[tuple(path_values)])
        except KeyError:
            raise ValidationError(f"no prize entry for path realization {tuple(path_values)}") from None


@dataclass(frozen=True, eq=False)
class EdgeSpec:
    cost: float
    kernel: object
    children: int = 0
    value: object = None

    @property
    def is_terminal(self):
        return self.children == 0


# --------------------------------------------------------------------------
# the tree


@dataclass(frozen=True, eq=False)
class SearchTree:
    root_children: int
    nodes: dict = field(repr=False)

    def __post_init__(self):
        ordered = dict(sorted(self.nodes.items()))
        object.__setattr__(self, "nodes", ordered)
        problems = _structural_problems(self.root_children, ordered)
        if not problems:
            problems = _coverage_problems(self)
        if problems:
            raise ValidationError(f"{len(problems)} problem(s) in tree", problems)

    # structure ---------------------------------------------------------
    def n_children(self, node):
        return self.root_children if node == ROOT else self.nodes[node].children

    @cached_property
    def _kids(self):
        out = {ROOT: tuple((i,) for i in range(1, self.root_children + 1))}
        for n, e in self.nodes.items():
            out[n] = tuple((*n, i) for i in range(1, e.children + 1))
        return out

    @cached_property
    def _terminal_set(self):
        return frozenset(self.terminals)

    def children(self, node):
        return self._kids[node]

    def edge(self, node):
        return self.nodes[node]

    def cost(self, node):
        return self.nodes[node].cost

    def is_terminal(self, node):
        return node in self._terminal_set

    @cached_property
    def terminals(self):
        return [n for n, e in self.nodes.items() if e.is_terminal]

    def descendants(self, node):
        """Nodes below ``node``, including ``node`` itself."""
        return [n for n in self.nodes if n[: len(node)] == node]

    def terminal_descendants(self, node):
        return [n for n in self.terminals if n[: len(node)] == node]

    @staticmethod
    def strict_ancestors(node):
        return [node[:k] for k in range(1, len(node))]

    @property
    def depth(self):
        return max(len(n) for n in self.nodes)

    @property
    def is_weitzman(self):
        return self.depth == 1

    @cached_property
    def is_discrete(self):
        return all(e.kernel.is_discrete for e in self.nodes.values())

    # laws and prizes ---------------------------------------------------
    def kernel(self, node, ancestors=()):
        return self.nodes[node].kernel.get(tuple(ancestors))

    def ancestor_values(self, node, realized):
        return tuple(realized[a] for a in self.strict_ancestors(node))

    def path_values(self, node, realized):
        return tuple(realized[node[:k]] for k in range(1, len(node) + 1))

    def prize(self, terminal, realized):
        return self.nodes[terminal].value(self.path_values(terminal, realized))

    def __len__(self):
        return len(self.nodes)


def _structural_problems(root_children, nodes):
    problems = []
    if not isinstance(root_children, int) or root_children < 1:
        problems.append("root must have at least one child")
        return problems
    for node, e in nodes.items():
        where = path_str(node)
        if not (isinstance(e.cost, (int, float)) and math.isfinite(e.cost)):
            problems.append(f"{where}: cost must be a finite number")
        elif e.cost < 0:
            problems.append(f"{where}: negative cost {e.cost}")
        if not isinstance(e.children, int) or e.children < 0:
            problems.append(f"{where}: child count must be a nonnegative integer")
        if e.is_terminal and e.value is None:
            problems.append(f"{where}: terminal node needs a value")
        if not e.is_terminal and e.value is not None:
            problems.append(f"{where}: only terminal nodes carry a value")
        parent = node[:-1]
        if parent and parent not in nodes:
            problems.append(f"{where}: parent {path_str(parent)} is missing")
    expected = set()
    frontier = [(i,) for i in range(1, root_children + 1)]
    while frontier:
        n = frontier.pop()
        expected.add(n)
        if n in nodes and isinstance(nodes[n].children, int):
            frontier.extend((*n, i) for i in range(1, nodes[n].children + 1))
    for n in sorted(expected - set(nodes)):
        problems.append(f"{path_str(n)}: declared by its parent but missing")
    for n in sorted(set(nodes) - expected):
        problems.append(f"{path_str(n)}: index outside its parent's child count")
    return problems


def _reachable_prefixes(tree, node):
    """All ancestor-realization vectors of ``node`` with positive probability."""
    out = [()]
    for anc in tree.strict_ancestors(node):
        nxt = []
        for prefix in out:
            d = tree.nodes[anc].kernel.get(prefix)
            if not d.is_discrete:
                return None
            nxt.extend((*prefix, float(v)) for v in d.values)
        out = nxt
    return out


def _coverage_problems(tree):
    problems = []
    for node, e in tree.nodes.items():
        tables = []
        if isinstance(e.kernel, ConditionalTable):
            tables.append(("kernel", e.kernel.table, False))
        if isinstance(e.value, ValueTable):
            tables.append(("value", e.value.table, True))
        for label, table, include_self in tables:
            prefixes = _reachable_prefixes(tree, node)
            if prefixes is None:
                problems.append(f"{path_str(node)}: {label} table needs discrete ancestors")
                continue
            if include_self:
                full = []
                for prefix in prefixes:
                    try:
                        d = tree.nodes[node].kernel.get(prefix)
                    except ValidationError:
                        continue
                    if not d.is_discrete:
                        problems.append(f"{path_str(node)}: value table needs a discrete signal")
                        break
                    full.extend((*prefix, float(v)) for v in d.values)
                prefixes = full
            missing = [p for p in prefixes if p not in table]
            if missing:
                problems.append(f"{path_str(node)}: {label} table misses {len(missing)} "
                                f"realization(s), e.g. {missing[0]}")
    return problems


# --------------------------------------------------------------------------
# file format


def _no_duplicates(pairs):
    seen = {}
    for k, v in pairs:
        if k in seen:
            raise ValidationError(f"duplicate key {k!r}")
        seen[k] = v
    return seen


def _parse_kernel(obj):
    if isinstance(obj, dict) and set(obj) == {"table"}:
        table = {}
        for key, lit in obj["table"]:
            k = tuple(float(v) for v in key)
            if k in table:
                raise ValidationError(f"duplicate kernel table entry {k}")
            table[k] = parse_distribution(lit)
        return ConditionalTable(table)
    return Unconditional(parse_distribution(obj))


def _parse_value(obj):
    if obj is None:
        return None
    if obj == "sum":
        return AdditiveSum()
    if obj == "last":
        return LastSignal()
    if isinstance(obj, dict) and set(obj) == {"table"}:
        table = {}
        for key, v in obj["table"]:
            k = tuple(float(x) for x in key)
            if k in table:
                raise ValidationError(f"duplicate value table entry {k}")
            table[k] = float(v)
        return ValueTable(table)
    raise ValidationError(f"unknown value function {obj!r}")


def tree_from_dict(doc):
    problems = []
    if not isinstance(doc, dict) or "nodes" not in doc or "children" not in doc:
        raise ValidationError("tree document needs 'children' and 'nodes'")
    nodes = {}
    keys_seen = {}
    for key, spec in doc["nodes"].items():
        try:
            node = parse_path(key)
        except ValueError:
            problems.append(f"{key!r}: node keys are dot-joined positive integers")
            continue
        if node in keys_seen:
            problems.append(f"{key!r}: duplicate child index (same node as {keys_seen[node]!r})")
            continue
        keys_seen[node] = key
        try:
            extra = set(spec) - {"children", "cost", "kernel", "value"}
            if extra:
                problems.append(f"{key}: unknown field(s) {sorted(extra)}")
            nodes[node] = EdgeSpec(
                cost=float(spec["cost"]),
                kernel=_parse_kernel(spec["kernel"]),
                children=int(spec.get("children", 0)),
                value=_parse_value(spec.get("value")),
            )
        except ValidationError as exc:
            problems.extend(f"{key}: {p}" for p in exc.problems)
        except (KeyError, TypeError, ValueError) as exc:
            problems.append(f"{key}: malformed node ({exc!r})")
    if problems:
        raise ValidationError(f"{len(problems)} problem(s) in tree", problems)
    return SearchTree(int(doc["children"]), nodes)


def parse_tree(text):
    """Parse and validate the JSON tree format (bytes or str)."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        doc = json.loads(text, object_pairs_hook=_no_duplicates)
    except ValidationError as exc:
        raise ValidationError(f"duplicate child index or field: {exc}", [f"coverage gap: {exc}"]) from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed tree file: {exc}") from None
    return tree_from_dict(doc)


def load_tree(path):
    with open(path, "rb") as fh:
        return parse_tree(fh.read())


def _kernel_literal(kernel):
    if isinstance(kernel, ConditionalTable):
        return {"table": [[list(k), distribution_literal(kernel.table[k])] for k in sorted(kernel.table)]}
    return distribution_literal(kernel.dist)


def _value_literal(value):
    if isinstance(value, ValueTable):
        return {"table": [[list(k), value.table[k]] for k in sorted(value.table)]}
    return value.name


def tree_to_dict(tree):
    nodes = {}
    for node, e in tree.nodes.items():
        spec = {"children": e.children, "cost": e.cost, "kernel": _kernel_literal(e.kernel)}
        if e.value is not None:
            spec["value"] = _value_literal(e.value)
        nodes[path_str(node)] = spec
    return {"children": tree.root_children, "nodes": nodes}


def serialize_tree(tree):
    """Canonical text: one node per line, nodes in path order."""
    doc = tree_to_dict(tree)
    lines = [f"  {json.dumps(k)}: {json.dumps(v)}" for k, v in doc["nodes"].items()]
    return '{"children": %d, "nodes": {\n%s\n}}\n' % (doc["children"], ",\n".join(lines))


# --------------------------------------------------------------------------
# realizations


def enumerate_realizations(tree):
    """Every joint outcome of a discrete tree with its probability."""
    if not tree.is_discrete:
        raise UnsupportedOperation("exact enumeration needs every kernel to be discrete")
    order = list(tree.nodes)
    outcomes = [({}, 1.0)]
    for node in order:
        nxt = []
        for realized, prob in outcomes:
            d = tree.kernel(node, tree.ancestor_values(node, realized))
            for v, q in zip(d.values, d.probs):
                r = dict(realized)
                r[node] = float(v)
                nxt.append((r, prob * float(q)))
        outcomes = nxt
    return outcomes


def sample_realizations(tree, rng, size):
    """``size`` joint draws as a dict of arrays keyed by node."""
    out = {}
    for node in tree.nodes:
        kernel = tree.nodes[node].kernel
        if isinstance(kernel, Unconditional):
            out[node] = np.asarray(kernel.dist.sample(rng, size), dtype=float)
            continue
        anc = np.stack([out[a] for a in tree.strict_ancestors(node)], axis=1)
        vals = np.empty(size)
        keys = [tuple(row) for row in anc.tolist()]
        for key in sorted(set(keys)):
            mask = np.fromiter((k == key for k in keys), bool, size)
            vals[mask] = kernel.get(key).sample(rng, int(mask.sum()))
        out[node] = vals
    return out


def single_box(prize, cost):
    """One-terminal tree: a box with the given prize law and inspection cost."""
    return SearchTree(1, {(1,): EdgeSpec(cost, Unconditional(prize), 0, LastSignal())})


def random_tree(rng, max_depth=3, max_fanout=3, max_nodes=10, cost_range=(0.0, 0.5),
                conditional_prob=0.3):
    """A random discrete tree with binary signals, for oracle batteries."""
    def binary():
        lo, hi = np.sort(np.round(rng.uniform(-1.0, 1.5, size=2), 3))
        if hi == lo:
            hi = lo + 0.5
        p = round(float(rng.uniform(0.1, 0.9)), 3)
        return DiscretePMF.from_pairs([(float(lo), p), (float(hi), 1.0 - p)])

    def cost():
        lo, hi = cost_range
        return float(round(hi - (hi - lo) * rng.random(), 4)) or hi

    nodes = {}
    n_root = int(rng.integers(1, max_fanout + 1))
    budget = [max_nodes - n_root]
    shapes = {}

    def grow(node, depth):
        if depth < max_depth and budget[0] > 0 and rng.random() < 0.6:
            k = int(min(rng.integers(1, max_fanout + 1), budget[0]))
            budget[0] -= k
            shapes[node] = k
            for i in range(1, k + 1):
                grow((*node, i), depth + 1)
        else:
            shapes[node] = 0

    for i in range(1, n_root + 1):
        grow((i,), 1)

    for node in sorted(shapes):
        conditional = len(node) > 1 and rng.random() < conditional_prob
        # conditional kernels are filled in below, once ancestor supports are known
        kernel = None if conditional else Unconditional(binary())
        nodes[node] = EdgeSpec(cost(), kernel, shapes[node], None)

    supports = {}
    for node in sorted(nodes):
        e = nodes[node]
        if e.kernel is None:
            prefixes = [()]
            for a in SearchTree.strict_ancestors(node):
                prefixes = [(*p, v) for p in prefixes for v in supports[a]]
            e = EdgeSpec(e.cost, ConditionalTable({p: binary() for p in prefixes}), e.children, None)
        d_vals = set()
        for d in e.kernel.distributions():
            d_vals.update(float(v) for v in d.values)
        supports[node] = sorted(d_vals)
        if e.children == 0:
            choice = rng.random()
            if choice < 0.5:
                value = AdditiveSum()
            elif choice < 0.75:
                value = LastSignal()
            else:
                prefixes = [()]
                for a in [*SearchTree.strict_ancestors(node), node]:
                    src = supports[a]
                    prefixes = [(*p, v) for p in prefixes for v in src]
                value = ValueTable({p: float(round(rng.uniform(-0.5, 1.5), 3)) for p in prefixes})
            e = EdgeSpec(e.cost, e.kernel, 0, value)
        nodes[node] = e
    return SearchTree(n_root, nodes)
