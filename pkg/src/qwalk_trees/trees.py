"""Decision trees: construction, validation, serialization, and the
base-plus-bushes canonical form.

Trees are stored with dense integer node ids assigned level-major
(ascending level, deterministic order inside each level), so a tree's id
layout doubles as the row/column ordering of any matrix built from it.
Levels run from -start_runway through n_levels + end_runway; negative
levels and levels above ``n_levels`` are runway (chain) sites.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import CapacityError

MAX_LEVELS = 24
MAX_NODES = 2 ** 25


# ---------------------------------------------------------------------------
# core tree type


@dataclass(frozen=True)
class DecisionTree:
    """Immutable level-labelled tree.

    ``levels[i]`` is the level of node id ``i``; ids are dense 0..N-1.
    ``labels`` optionally carries the bit-prefix of each tree node (runway
    nodes get None); it is diagnostic only and excluded from equality.
    """

    n_levels: int
    levels: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]
    root_id: int
    target_ids: tuple[int, ...]
    labels: tuple | None = field(default=None, compare=False)

    @property
    def n_nodes(self) -> int:
        return len(self.levels)

    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        return adj

    def degree(self, node: int) -> int:
        return sum(1 for a, b in self.edges if a == node or b == node)

    def nodes_at_level(self, level: int) -> list[int]:
        return [i for i, lv in enumerate(self.levels) if lv == level]

    def unique_target(self) -> int:
        if len(self.target_ids) != 1:
            raise ValueError(
                f"expected a unique level-{self.n_levels} node, found {len(self.target_ids)}"
            )
        return self.target_ids[0]

    def to_json(self) -> str:
        return json.dumps(
            {
                "n": self.n_levels,
                "nodes": [{"id": i, "level": lv} for i, lv in enumerate(self.levels)],
                "edges": [[a, b] for a, b in self.edges],
                "root": self.root_id,
                "targets": list(self.target_ids),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "DecisionTree":
        obj = json.loads(text)
        order = sorted(obj["nodes"], key=lambda r: r["id"])
        if [r["id"] for r in order] != list(range(len(order))):
            raise ValueError("node ids must be dense 0..N-1")
        t = cls(
            n_levels=int(obj["n"]),
            levels=tuple(int(r["level"]) for r in order),
            edges=tuple(sorted((min(a, b), max(a, b)) for a, b in obj["edges"])),
            root_id=int(obj["root"]),
            target_ids=tuple(int(x) for x in obj["targets"]),
        )
        validate_tree(t)
        return t


def validate_tree(t: DecisionTree) -> None:
    """Assert the structural invariants every constructor must guarantee."""
    n_nodes = t.n_nodes
    if n_nodes == 0:
        raise ValueError("empty tree")
    if len(t.edges) != n_nodes - 1:
        raise ValueError(f"tree must have N-1 edges, got {len(t.edges)} for N={n_nodes}")
    adj = t.adjacency()
    # connectivity
    seen = {t.root_id}
    stack = [t.root_id]
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    if len(seen) != n_nodes:
        raise ValueError("tree is not connected")
    # edges join adjacent levels only
    for a, b in t.edges:
        if abs(t.levels[a] - t.levels[b]) != 1:
            raise ValueError(f"edge ({a},{b}) joins levels {t.levels[a]},{t.levels[b]}")
    if t.levels[t.root_id] != 0:
        raise ValueError("root must sit at level 0")
    # one-parent rule: every node at level >= 1 has exactly one neighbor one
    # level down; start-runway nodes (level <= -1) have exactly one neighbor
    # one level up.
    for v in range(n_nodes):
        lv = t.levels[v]
        if lv >= 1:
            below = sum(1 for w in adj[v] if t.levels[w] == lv - 1)
            if below != 1:
                raise ValueError(f"node {v} at level {lv} has {below} parents")
        elif lv <= -1:
            above = sum(1 for w in adj[v] if t.levels[w] == lv + 1)
            if above != 1:
                raise ValueError(f"runway node {v} at level {lv} has {above} up-neighbors")
        if len(adj[v]) > 3:
            raise ValueError(f"node {v} has degree {len(adj[v])} > 3")
    for v in t.target_ids:
        if t.levels[v] != t.n_levels:
            raise ValueError("target ids must sit at level n")
    expected_targets = [v for v in range(n_nodes) if t.levels[v] == t.n_levels]
    if sorted(t.target_ids) != sorted(expected_targets):
        raise ValueError("target_ids do not match the level-n node set")


def _assemble(node_keys, edges_by_key, n_levels, labels=None):
    """Build a DecisionTree from (level, tiebreak) keyed nodes.

    node_keys: list of hashable keys; each maps to (level, order) for sorting.
    """
    order = sorted(node_keys, key=node_keys.get)
    if len(order) > MAX_NODES:
        raise CapacityError(f"{len(order)} nodes exceeds the {MAX_NODES} node guard")
    ids = {k: i for i, k in enumerate(order)}
    levels = tuple(node_keys[k][0] for k in order)
    edges = tuple(sorted((min(ids[a], ids[b]), max(ids[a], ids[b])) for a, b in edges_by_key))
    root = next(k for k in order if node_keys[k][0] == 0 and (labels is None or labels.get(k) == ""))
    targets = tuple(ids[k] for k in order if node_keys[k][0] == n_levels)
    lab = tuple(labels.get(k) for k in order) if labels is not None else None
    t = DecisionTree(n_levels, levels, edges, ids[root], targets, lab)
    validate_tree(t)
    return t


# ---------------------------------------------------------------------------
# constraint families


class ConstraintFamily:
    """Indexed family of pure predicates f_i(x_1..x_i) with a call counter."""

    def __init__(self, n: int, f):
        self.n = n
        self._f = f
        self.calls = 0

    def evaluate(self, i: int, bits: tuple[int, ...]) -> int:
        if not (1 <= i <= self.n):
            raise ValueError(f"level index {i} outside 1..{self.n}")
        if len(bits) != i:
            raise ValueError(f"f_{i} needs exactly {i} bits, got {len(bits)}")
        self.calls += 1
        return 1 if self._f(i, bits) else 0


def all_ones_family(n: int) -> ConstraintFamily:
    return ConstraintFamily(n, lambda i, bits: 1)


# ---------------------------------------------------------------------------
# builders


def _check_depth(n: int) -> None:
    if not (1 <= n <= MAX_LEVELS):
        raise CapacityError(f"n={n} outside the supported range 1..{MAX_LEVELS}")


def _bit_key(level: int, bits: tuple[int, ...]):
    return (level, bits)


def build_underlying_tree(n: int) -> DecisionTree:
    """Perfect bifurcating tree: 2^m nodes at level m, 2^(n+1)-1 in total."""
    _check_depth(n)
    return trim_tree(n, all_ones_family(n))


def trim_tree(n: int, family: ConstraintFamily) -> DecisionTree:
    """Keep node x_1..x_i iff f_j(x_1..x_j)=1 for every j <= i.

    Children of excluded nodes are never generated, which removes whole
    dangling branches in one pass. Dead ends above level n are kept.
    """
    _check_depth(n)
    if family.n < n:
        raise ValueError("constraint family does not cover all levels")
    keys = {(0, ()): (0, ())}
    labels = {(0, ()): ""}
    edges = []
    frontier = [()]
    for i in range(1, n + 1):
        nxt = []
        for prefix in frontier:
            for bit in (0, 1):
                child = prefix + (bit,)
                if family.evaluate(i, child):
                    keys[(i, child)] = (i, child)
                    labels[(i, child)] = "".join(map(str, child))
                    edges.append(((i - 1, prefix), (i, child)))
                    nxt.append(child)
        frontier = nxt
    return _assemble(keys, edges, n, labels)


def build_grover_tree(n: int, w: str) -> DecisionTree:
    """Bifurcating through level n-1, then the single marked node below w[:n-1]."""
    if n < 2:
        raise ValueError("grover tree needs n >= 2")
    wbits = _parse_bits(w, n)
    fam = ConstraintFamily(n, lambda i, bits: i < n or bits == wbits)
    return trim_tree(n, fam)


def build_even_bush_tree(n: int, w: str) -> DecisionTree:
    """Grover tree with every odd-height bush along w trimmed back one layer.

    Level n-1 keeps exactly the nodes whose longest common prefix with w is
    odd (or the full base prefix); for even n this leaves all bush heights
    even.
    """
    if n % 2 != 0:
        raise ValueError("even-bush construction is defined for even n only")
    if n < 2:
        raise ValueError("even-bush tree needs n >= 2")
    wbits = _parse_bits(w, n)

    def f(i, bits):
        if i < n - 1:
            return 1
        if i == n:
            return bits == wbits
        m = _match_length(bits, wbits)
        return 1 if (m == n - 1 or m % 2 == 1) else 0

    return trim_tree(n, ConstraintFamily(n, f))


def _match_length(bits, wbits) -> int:
    m = 0
    for b, wb in zip(bits, wbits):
        if b != wb:
            break
        m += 1
    return m


def _parse_bits(w, n: int) -> tuple[int, ...]:
    if isinstance(w, str):
        bits = tuple(int(c) for c in w)
    else:
        bits = tuple(int(b) for b in w)
    if len(bits) != n or any(b not in (0, 1) for b in bits):
        raise ValueError(f"w must be a bitstring of length {n}")
    return bits


def attach_runways(t: DecisionTree, start_len: int, end_len: int) -> DecisionTree:
    """Append linear chains below the root and above the unique target."""
    if start_len < 0 or end_len < 0:
        raise ValueError("runway lengths must be nonnegative")
    if start_len == 0 and end_len == 0:
        return t
    if end_len > 0:
        target = t.unique_target()
    if min(t.levels) < 0 or max(t.levels) > t.n_levels:
        raise ValueError("tree already has runways attached")
    keys = {}
    labels = {}
    order_in_level: dict[int, int] = {}
    for v in range(t.n_nodes):
        lv = t.levels[v]
        keys[("t", v)] = (lv, (0, v))
        if t.labels is not None:
            labels[("t", v)] = t.labels[v]
        else:
            labels[("t", v)] = None
    edges = [(("t", a), ("t", b)) for a, b in t.edges]
    prev = ("t", t.root_id)
    for j in range(1, start_len + 1):
        key = ("s", j)
        keys[key] = (-j, (0, 0))
        labels[key] = None
        edges.append((prev, key))
        prev = key
    if end_len > 0:
        prev = ("t", target)
        for j in range(1, end_len + 1):
            key = ("e", j)
            keys[key] = (t.n_levels + j, (0, 0))
            labels[key] = None
            edges.append((prev, key))
            prev = key
    order = sorted(keys, key=keys.get)
    if len(order) > MAX_NODES:
        raise CapacityError(f"{len(order)} nodes exceeds the {MAX_NODES} node guard")
    ids = {k: i for i, k in enumerate(order)}
    levels = tuple(keys[k][0] for k in order)
    new_edges = tuple(sorted((min(ids[a], ids[b]), max(ids[a], ids[b])) for a, b in edges))
    lab = tuple(labels[k] for k in order) if t.labels is not None else None
    out = DecisionTree(
        t.n_levels,
        levels,
        new_edges,
        ids[("t", t.root_id)],
        tuple(ids[("t", v)] for v in t.target_ids),
        lab,
    )
    validate_tree(out)
    return out


def default_runway_length(t_max: float) -> int:
    """Length that keeps a truncated runway transparent to speed-2 spreading."""
    import math

    return max(100, math.ceil(4.0 * t_max))


# ---------------------------------------------------------------------------
# base + bush canonical form


@dataclass(frozen=True)
class NoBush:
    def n_nodes(self) -> int:
        return 0


@dataclass(frozen=True)
class PerfectBush:
    """Perfectly bifurcating bush: 2^(l-1) nodes at height l, 1 <= l <= height."""

    height: int

    def n_nodes(self) -> int:
        return 2 ** self.height - 1


@dataclass(frozen=True)
class ExplicitBush:
    """Arbitrary bush stored as a canonical parent array.

    Node 0 is the height-1 node attached to the base; parents[i] < i and
    parents[0] == -1. Children are ordered canonically (sorted subtree
    certificates), so equal shapes compare equal.
    """

    parents: tuple[int, ...]

    def n_nodes(self) -> int:
        return len(self.parents)

    def heights(self) -> tuple[int, ...]:
        h = [0] * len(self.parents)
        for i, p in enumerate(self.parents):
            h[i] = 1 if p < 0 else h[p] + 1
        return tuple(h)

    def edges(self) -> list[tuple[int, int]]:
        return [(p, i) for i, p in enumerate(self.parents) if p >= 0]


BushSpec = NoBush | PerfectBush | ExplicitBush


@dataclass(frozen=True)
class BaseBushForm:
    """A unique-target tree redrawn as a base line with hanging bushes.

    ``bushes[m]`` is the bush at base position m for m = 0..base_length-2;
    positions base_length-1 and base_length never carry bushes.
    """

    base_length: int
    bushes: tuple[BushSpec, ...] = ()
    start_runway: int = 0
    end_runway: int = 0

    def __post_init__(self):
        n = self.base_length
        if n < 0:
            raise ValueError("base_length must be nonnegative")
        if len(self.bushes) != max(n - 1, 0):
            raise ValueError(
                f"need {max(n - 1, 0)} bush slots (positions 0..{n - 2}), got {len(self.bushes)}"
            )
        if self.start_runway < 0 or self.end_runway < 0:
            raise ValueError("runway lengths must be nonnegative")

    def n_nodes(self) -> int:
        return (
            self.base_length
            + 1
            + self.start_runway
            + self.end_runway
            + sum(b.n_nodes() for b in self.bushes)
        )

    def bush_heights(self) -> tuple[int, ...]:
        out = []
        for b in self.bushes:
            if isinstance(b, NoBush):
                out.append(0)
            elif isinstance(b, PerfectBush):
                out.append(b.height)
            else:
                out.append(max(b.heights()))
        return tuple(out)


def grover_form(n: int, start_runway: int = 0, end_runway: int = 0) -> BaseBushForm:
    """Base-bush layout of the marked-node tree: bush height n-1-m at position m."""
    if n < 2:
        raise ValueError("grover form needs n >= 2")
    return BaseBushForm(
        n, tuple(PerfectBush(n - 1 - m) for m in range(n - 1)), start_runway, end_runway
    )


def even_bush_form(n: int, start_runway: int = 0, end_runway: int = 0) -> BaseBushForm:
    """Grover layout with odd bush heights reduced by one layer."""
    if n % 2 != 0:
        raise ValueError("even-bush form is defined for even n only")
    bushes: list[BushSpec] = []
    for m in range(n - 1):
        k = n - 1 - m
        k -= k % 2
        bushes.append(PerfectBush(k) if k > 0 else NoBush())
    return BaseBushForm(n, tuple(bushes), start_runway, end_runway)


def line_form(n_sites: int, start_runway: int = 0, end_runway: int = 0) -> BaseBushForm:
    """A bare chain of n_sites nodes expressed as an all-NoBush base."""
    if n_sites < 1:
        raise ValueError("need at least one site")
    n = n_sites - 1
    return BaseBushForm(n, tuple(NoBush() for _ in range(max(n - 1, 0))), start_runway, end_runway)


def perfect_bush_parents(height: int) -> tuple[int, ...]:
    """Parent array of the perfectly bifurcating bush, in canonical order."""
    parents = [-1]
    frontier = [0]
    for _ in range(1, height):
        nxt = []
        for p in frontier:
            for _ in range(2):
                parents.append(p)
                nxt.append(len(parents) - 1)
        frontier = nxt
    return tuple(parents)


def from_base_bush_form(b: BaseBushForm) -> DecisionTree:
    """Materialize node/edge form; inverse of :func:`to_base_bush_form`."""
    n = b.base_length
    keys = {}
    edges = []
    for j in range(-b.start_runway, n + b.end_runway + 1):
        keys[("b", j)] = (j, (0, 0, 0))
        if j > -b.start_runway:
            edges.append((("b", j - 1), ("b", j)))
    for m, bush in enumerate(b.bushes):
        if isinstance(bush, NoBush):
            continue
        parents = bush.parents if isinstance(bush, ExplicitBush) else perfect_bush_parents(bush.height)
        heights = ExplicitBush(parents).heights()
        for i, p in enumerate(parents):
            keys[("u", m, i)] = (m + heights[i], (1, m, i))
            edges.append((("b", m) if p < 0 else ("u", m, p), ("u", m, i)))
    return _assemble(keys, edges, n)


def to_base_bush_form(t: DecisionTree) -> BaseBushForm:
    """Decompose a unique-target tree into base path, bushes, and runways."""
    target = t.unique_target()
    n = t.n_levels
    adj = t.adjacency()
    base = [target]
    cur = target
    for lv in range(n, 0, -1):
        parents = [w for w in adj[cur] if t.levels[w] == lv - 1]
        if len(parents) != 1:
            raise ValueError(f"base node at level {lv} has {len(parents)} parents")
        cur = parents[0]
        base.append(cur)
    base.reverse()
    if base[0] != t.root_id:
        raise ValueError("root is not on the path to the target")
    start_runway = sum(1 for lv in t.levels if lv < 0)
    end_runway = sum(1 for lv in t.levels if lv > n)
    bushes: list[BushSpec] = []
    for m in range(max(n - 1, 0)):
        ups = [w for w in adj[base[m]] if t.levels[w] == m + 1 and w != base[m + 1]]
        if not ups:
            bushes.append(NoBush())
            continue
        if len(ups) > 1:
            raise ValueError(f"base position {m} carries more than one bush")
        bushes.append(_extract_bush(t, adj, base[m], ups[0]))
    # uniqueness of the target already forbids bushes at n-1 and n
    return BaseBushForm(n, tuple(bushes), start_runway, end_runway)


def _extract_bush(t: DecisionTree, adj, base_node: int, bush_root: int) -> BushSpec:
    children: dict[int, list[int]] = {}
    order = [bush_root]
    stack = [(bush_root, base_node)]
    while stack:
        v, parent = stack.pop()
        kids = [w for w in adj[v] if w != parent]
        children[v] = kids
        for w in kids:
            order.append(w)
            stack.append((w, v))
    # perfect-shape test: 2^(l-1) nodes at height l, all leaves at the top
    base_level = t.levels[base_node]
    height_of = {v: t.levels[v] - base_level for v in order}
    k = max(height_of.values())
    counts = [0] * (k + 1)
    for v in order:
        counts[height_of[v]] += 1
    perfect = all(counts[h] == 2 ** (h - 1) for h in range(1, k + 1)) and len(order) == 2 ** k - 1
    if perfect:
        return PerfectBush(k)
    return ExplicitBush(_canonical_parents(bush_root, children))


def _canonical_parents(root: int, children: dict[int, list[int]]) -> tuple[int, ...]:
    cert: dict[int, tuple] = {}
    for v in _postorder(root, children):
        cert[v] = tuple(sorted(cert[c] for c in children[v]))
    parents = [-1]
    ids = {root: 0}
    queue = [root]
    while queue:
        v = queue.pop(0)
        for c in sorted(children[v], key=lambda c: cert[c]):
            ids[c] = len(parents)
            parents.append(ids[v])
            queue.append(c)
    return tuple(parents)


def _postorder(root: int, children: dict[int, list[int]]):
    out = []
    stack = [root]
    while stack:
        v = stack.pop()
        out.append(v)
        stack.extend(children[v])
    return reversed(out)


def canonical_certificate(t: DecisionTree) -> tuple:
    """Level-aware AHU certificate: equal iff trees are isomorphic respecting
    levels and the root."""
    adj = t.adjacency()
    root = t.root_id
    # iterative post-order from the root over the whole (undirected) tree
    parent = {root: -1}
    order = [root]
    stack = [root]
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if w != parent[v]:
                parent[w] = v
                order.append(w)
                stack.append(w)
    cert: dict[int, tuple] = {}
    for v in reversed(order):
        kids = sorted(cert[w] for w in adj[v] if w != parent[v])
        cert[v] = (t.levels[v], tuple(kids))
    return cert[root]
