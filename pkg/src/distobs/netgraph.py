"""Directed-graph algorithms for sensor networks.

Strongly connected components (iterative Tarjan), source components, and a
family of layered spanning structures — single-root BFS trees, multi-root
forests, and redundant multi-parent DAGs — that the observer synthesis uses to
route estimates from informed nodes to the rest of the network.

All tie-breaking is deterministic (ascending node id), so repeated runs and
golden tests see identical structures.  Node ids are 1-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import NotSpanning

__all__ = [
    "Digraph",
    "SpanningStructure",
    "strong_components",
    "source_components",
    "bfs_tree",
    "spanning_forest",
    "spanning_dag",
    "subgraph",
]


@dataclass(frozen=True)
class Digraph:
    """Directed graph on nodes ``1..n_nodes`` with edge ``(j, i)`` meaning j→i.

    Self-loops are dropped on construction: a node always hears itself, so the
    loop carries no information and the stored edge set stays loop-free.
    """

    n_nodes: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n_nodes < 0:
            raise ValueError(f"n_nodes must be >= 0, got {self.n_nodes}")
        cleaned = set()
        for e in self.edges:
            try:
                j, i = e
            except (TypeError, ValueError):
                raise ValueError(f"edge {e!r} is not an ordered pair") from None
            j, i = int(j), int(i)
            if not (1 <= j <= self.n_nodes and 1 <= i <= self.n_nodes):
                raise ValueError(
                    f"edge ({j}, {i}) references a node outside 1..{self.n_nodes}"
                )
            if j != i:
                cleaned.add((j, i))
        object.__setattr__(self, "edges", frozenset(cleaned))

    @property
    def nodes(self):
        return tuple(range(1, self.n_nodes + 1))

    def in_neighbors(self, i):
        """Nodes j with an edge j→i, ascending."""
        return tuple(sorted(j for (j, k) in self.edges if k == i))

    def out_neighbors(self, j):
        """Nodes i with an edge j→i, ascending."""
        return tuple(sorted(i for (k, i) in self.edges if k == j))

    def closed_in_neighborhood(self, i):
        """``{i}`` plus in-neighbors — the set a node can hear each step."""
        return tuple(sorted({i, *self.in_neighbors(i)}))


@dataclass(frozen=True)
class SpanningStructure:
    """Layered acyclic routing structure rooted at ``roots``.

    ``parent_sets`` maps each non-root node to its ordered parent tuple
    (singleton for trees); ``topo_order`` lists all covered nodes with every
    parent strictly before its children, so the parent-relation adjacency is
    strictly lower triangular after relabeling by this order.
    """

    roots: frozenset
    parent_sets: dict
    topo_order: tuple

    def parents(self, i):
        return self.parent_sets.get(i, ())


def _succ_map(g):
    succ = {v: [] for v in g.nodes}
    for j, i in g.edges:
        succ[j].append(i)
    for v in succ:
        succ[v].sort()
    return succ


def strong_components(g):
    """Strongly connected components, in reverse-topological condensation order.

    Iterative Tarjan with ascending-id traversal; each component comes out as
    a sorted tuple, and a component is emitted only after every component it
    has edges into.
    """
    succ = _succ_map(g)
    index = {}
    low = {}
    on_stack = set()
    stack = []
    components = []
    counter = 0
    for start in g.nodes:
        if start in index:
            continue
        work = [(start, 0)]
        while work:
            v, ptr = work[-1]
            if ptr == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack.add(v)
            advanced = False
            while ptr < len(succ[v]):
                w = succ[v][ptr]
                ptr += 1
                if w not in index:
                    work[-1] = (v, ptr)
                    work.append((w, 0))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                components.append(tuple(sorted(comp)))
            if work:
                u, _ = work[-1]
                low[u] = min(low[u], low[v])
    return components


def source_components(g):
    """Strong components with no in-edges from outside, sorted by least node.

    These are the components whose nodes can never be told anything by the
    rest of the network — each must be informative on its own for any
    distributed observer to exist.
    """
    comps = strong_components(g)
    member = {}
    for k, comp in enumerate(comps):
        for v in comp:
            member[v] = k
    has_external_in = [False] * len(comps)
    for j, i in g.edges:
        if member[j] != member[i]:
            has_external_in[member[i]] = True
    sources = [comp for k, comp in enumerate(comps) if not has_external_in[k]]
    return sorted(sources, key=lambda c: c[0])


def _layered_structure(g, roots, max_parents):
    roots = frozenset(int(r) for r in roots)
    for r in roots:
        if not (1 <= r <= g.n_nodes):
            raise ValueError(f"root {r} is outside 1..{g.n_nodes}")
    if not roots and g.n_nodes:
        raise ValueError("at least one root is required")
    if max_parents < 1:
        raise ValueError(f"max_parents must be >= 1, got {max_parents}")
    succ = _succ_map(g)
    pred = {v: g.in_neighbors(v) for v in g.nodes}
    # Multi-source BFS layering: layer = shortest edge distance from the roots.
    layer = {r: 0 for r in roots}
    frontier = sorted(roots)
    d = 0
    while frontier:
        nxt = []
        for v in frontier:
            for w in succ[v]:
                if w not in layer:
                    layer[w] = d + 1
                    nxt.append(w)
        frontier = sorted(set(nxt))
        d += 1
    unreachable = [v for v in g.nodes if v not in layer]
    if unreachable:
        raise NotSpanning(
            f"nodes {sorted(unreachable)} are unreachable from roots "
            f"{sorted(roots)}",
            unreachable=unreachable,
        )
    order = sorted(layer, key=lambda v: (layer[v], v))
    # Parent candidates: in-neighbors strictly earlier in the (layer, id)
    # order.  Every non-root has one at the previous layer by construction;
    # same-layer lower-id neighbors add redundancy for multi-parent DAGs while
    # keeping the relation acyclic.
    parent_sets = {}
    for v in order:
        if v in roots:
            continue
        cands = [u for u in pred[v] if (layer[u], u) < (layer[v], v)]
        cands.sort(key=lambda u: (layer[u], u))
        parent_sets[v] = tuple(cands[:max_parents])
    return SpanningStructure(roots, parent_sets, tuple(order))


def bfs_tree(g, root):
    """BFS spanning tree rooted at one node; single parent per non-root.

    ``topo_order`` is the BFS discovery order with ascending-id tie-breaks.
    Raises :class:`NotSpanning` (carrying the unreachable set) if the root
    does not reach every node.
    """
    return _layered_structure(g, {root}, 1)


def spanning_forest(g, roots):
    """Multi-root BFS forest: every non-root gets exactly one parent.

    Equivalent to :func:`bfs_tree` when ``roots`` is a singleton, and to
    :func:`spanning_dag` with ``max_parents=1``.
    """
    return _layered_structure(g, roots, 1)


def spanning_dag(g, roots, max_parents):
    """Redundant layered DAG: up to ``max_parents`` parents per non-root node.

    Extra parents give a node alternative sources when links fail; with
    ``max_parents=1`` this is exactly :func:`spanning_forest`.
    """
    return _layered_structure(g, roots, max_parents)


def subgraph(g, keep):
    """Restriction of ``g`` to ``keep``, relabeled to ``1..len(keep)``.

    Returns ``(h, original_ids)`` where ``original_ids[k-1]`` is the node of
    ``g`` that became node ``k`` of ``h``.
    """
    ids = tuple(sorted({int(v) for v in keep}))
    for v in ids:
        if not (1 <= v <= g.n_nodes):
            raise ValueError(f"node {v} is outside 1..{g.n_nodes}")
    relabel = {v: k + 1 for k, v in enumerate(ids)}
    edges = {
        (relabel[j], relabel[i])
        for (j, i) in g.edges
        if j in relabel and i in relabel
    }
    return Digraph(len(ids), frozenset(edges)), ids
