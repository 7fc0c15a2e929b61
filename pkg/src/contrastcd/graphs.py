"""Graph types, d-separation, Meek closure and evaluation metrics.

Nodes are integer indices ``0..n-1``. Directed edges are ``(parent, child)``
tuples; undirected edges are stored as sorted ``(lo, hi)`` tuples.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Union

import numpy as np

REGIME = "C"


class GraphInputError(ValueError):
    """Raised for malformed graph arguments (bad indices, overlapping sets)."""


class ClosureConflict(Exception):
    """Background knowledge is inconsistent with the PDAG it is applied to.

    ``edges`` names the offending directed constraints. ``kind`` is either
    ``"orientation"`` (a constraint opposes an existing directed edge or
    another constraint) or ``"cycle"`` (the directed part became cyclic).
    """

    def __init__(self, kind: str, edges: Iterable[tuple[int, int]]):
        self.kind = kind
        self.edges = sorted(set(edges))
        super().__init__(f"{kind} conflict on edges {self.edges}")


def _pair(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def _check_range(n: int, nodes: Iterable[int]) -> None:
    for v in nodes:
        if not (0 <= v < n):
            raise GraphInputError(f"node {v} out of range for n={n}")


def is_acyclic(edges: Iterable[tuple[int, int]], n: int) -> bool:
    """True iff the directed edge set admits a topological order."""
    edges = list(edges)
    _check_range(n, (v for e in edges for v in e))
    return topological_order(n, edges) is not None


def topological_order(n: int, edges: Iterable[tuple[int, int]]) -> list[int] | None:
    """Kahn's algorithm; returns None when the graph has a cycle."""
    children: list[list[int]] = [[] for _ in range(n)]
    indeg = [0] * n
    for a, b in edges:
        children[a].append(b)
        indeg[b] += 1
    queue = deque(sorted(v for v in range(n) if indeg[v] == 0))
    order = []
    while queue:
        v = queue.popleft()
        order.append(v)
        for c in children[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                queue.append(c)
    return order if len(order) == n else None


@dataclass(frozen=True)
class Dag:
    n: int
    edges: frozenset[tuple[int, int]] = frozenset()

    def __post_init__(self):
        edges = frozenset((int(a), int(b)) for a, b in self.edges)
        object.__setattr__(self, "edges", edges)
        _check_range(self.n, (v for e in edges for v in e))
        if any(a == b for a, b in edges):
            raise GraphInputError("self-loop in DAG")
        if any((b, a) in edges for a, b in edges):
            raise GraphInputError("both orientations of one pair in DAG")
        if topological_order(self.n, edges) is None:
            raise GraphInputError("edge set contains a directed cycle")

    def parents(self, v: int) -> list[int]:
        return sorted(a for a, b in self.edges if b == v)

    def children(self, v: int) -> list[int]:
        return sorted(b for a, b in self.edges if a == v)

    def roots(self) -> list[int]:
        heads = {b for _, b in self.edges}
        return [v for v in range(self.n) if v not in heads]

    def order(self) -> list[int]:
        return topological_order(self.n, self.edges)

    def skeleton(self) -> frozenset[tuple[int, int]]:
        return frozenset(_pair(a, b) for a, b in self.edges)

    def descendants(self, v: int) -> set[int]:
        ch = [[] for _ in range(self.n)]
        for a, b in self.edges:
            ch[a].append(b)
        seen: set[int] = set()
        stack = list(ch[v])
        while stack:
            u = stack.pop()
            if u not in seen:
                seen.add(u)
                stack.extend(ch[u])
        return seen

    def v_structures(self) -> set[tuple[int, int, int]]:
        """Triples ``(a, b, c)`` with ``a < c``, ``a -> b <- c``, a and c nonadjacent."""
        skel = self.skeleton()
        out = set()
        for b in range(self.n):
            pa = self.parents(b)
            for x in range(len(pa)):
                for y in range(x + 1, len(pa)):
                    a, c = pa[x], pa[y]
                    if _pair(a, c) not in skel:
                        out.add((a, b, c))
        return out

    def to_pdag(self) -> "Pdag":
        return Pdag(self.n, self.edges, frozenset())


@dataclass(frozen=True)
class AugmentedDag:
    """A DAG plus the regime node ``C`` pointing into every target.

    Internally ``C`` gets index ``base.n``; callers may also address it with
    the :data:`REGIME` sentinel.
    """

    base: Dag
    targets: frozenset[int] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "targets", frozenset(int(t) for t in self.targets))
        _check_range(self.base.n, self.targets)

    @property
    def regime_node(self) -> int:
        return self.base.n

    def as_dag(self) -> Dag:
        c = self.regime_node
        return Dag(self.base.n + 1, self.base.edges | {(c, t) for t in self.targets})


@dataclass(frozen=True)
class Pdag:
    n: int
    directed: frozenset[tuple[int, int]] = frozenset()
    undirected: frozenset[tuple[int, int]] = frozenset()

    def __post_init__(self):
        d = frozenset((int(a), int(b)) for a, b in self.directed)
        u = frozenset(_pair(int(a), int(b)) for a, b in self.undirected)
        object.__setattr__(self, "directed", d)
        object.__setattr__(self, "undirected", u)
        _check_range(self.n, (v for e in d | u for v in e))
        if any(a == b for a, b in d | u):
            raise GraphInputError("self-loop in PDAG")
        dpairs = [_pair(a, b) for a, b in d]
        if len(set(dpairs)) != len(dpairs):
            raise GraphInputError("pair carries two directed edges")
        if set(dpairs) & u:
            raise GraphInputError("pair is both directed and undirected")

    def skeleton(self) -> frozenset[tuple[int, int]]:
        return frozenset(_pair(a, b) for a, b in self.directed) | self.undirected

    def adjacent(self, a: int, b: int) -> bool:
        return _pair(a, b) in self.skeleton()

    def neighbors(self, v: int) -> set[int]:
        out = set()
        for a, b in self.skeleton():
            if a == v:
                out.add(b)
            elif b == v:
                out.add(a)
        return out

    def is_directed(self, a: int, b: int) -> bool:
        return (a, b) in self.directed

    def is_undirected(self, a: int, b: int) -> bool:
        return _pair(a, b) in self.undirected

    def restrict(self, nodes: Iterable[int]) -> "Pdag":
        keep = set(nodes)
        return Pdag(
            self.n,
            frozenset(e for e in self.directed if e[0] in keep and e[1] in keep),
            frozenset(e for e in self.undirected if e[0] in keep and e[1] in keep),
        )

    def __str__(self) -> str:
        parts = [f"{a}->{b}" for a, b in sorted(self.directed)]
        parts += [f"{a}--{b}" for a, b in sorted(self.undirected)]
        return "{" + ", ".join(parts) + "}"


GraphLike = Union[Dag, Pdag]


# ---------------------------------------------------------------------------
# d-separation


def _resolve(g: Dag | AugmentedDag, v) -> int:
    if isinstance(g, AugmentedDag) and (v == REGIME):
        return g.regime_node
    return int(v)


def d_separated(g: Dag | AugmentedDag, a, b, Z: Iterable = ()) -> bool:
    """Reachability ("Bayes ball") test of ``a _||_ b | Z``.

    For an :class:`AugmentedDag`, ``a`` or ``b`` may be :data:`REGIME`.
    """
    dag = g.as_dag() if isinstance(g, AugmentedDag) else g
    a = _resolve(g, a)
    b = _resolve(g, b)
    Zs = {_resolve(g, z) for z in Z}
    _check_range(dag.n, [a, b, *Zs])
    if a == b or a in Zs or b in Zs:
        raise GraphInputError("d-separation query needs distinct a, b outside Z")
    return b not in _reachable(dag.n, dag.edges, a, Zs)


def _reachable(n: int, edges, source: int, Z: set[int]) -> set[int]:
    parents: list[list[int]] = [[] for _ in range(n)]
    children: list[list[int]] = [[] for _ in range(n)]
    for p, c in edges:
        parents[c].append(p)
        children[p].append(c)
    # ancestors of Z (including Z) activate colliders
    anc = set(Z)
    stack = list(Z)
    while stack:
        v = stack.pop()
        for p in parents[v]:
            if p not in anc:
                anc.add(p)
                stack.append(p)
    # state: (node, arrived_from_child)  -- "up" means travelling against edges
    visited = set()
    reach = set()
    frontier = [(source, True)]
    while frontier:
        v, up = frontier.pop()
        if (v, up) in visited:
            continue
        visited.add((v, up))
        if v not in Z:
            reach.add(v)
        if up and v not in Z:
            frontier.extend((p, True) for p in parents[v])
            frontier.extend((c, False) for c in children[v])
        elif not up:
            if v not in Z:
                frontier.extend((c, False) for c in children[v])
            if v in anc:
                frontier.extend((p, True) for p in parents[v])
    reach.discard(source)
    return reach


def d_connected_set(dag: Dag, source: int, Z: Iterable[int]) -> set[int]:
    """All nodes d-connected to ``source`` given ``Z`` (excluding Z and source)."""
    return _reachable(dag.n, dag.edges, source, set(Z))


# ---------------------------------------------------------------------------
# Meek closure


def meek_close(p: Pdag, background: Iterable[tuple[int, int]] = ()) -> Pdag:
    """Apply background orientations, then Meek rules R1-R4 to a fixed point.

    Raises :class:`ClosureConflict` if a background edge opposes an existing
    orientation or the directed part becomes cyclic. Raises
    :class:`GraphInputError` if a background edge is off the skeleton.
    """
    n = p.n
    background = sorted(set((int(a), int(b)) for a, b in background))
    skel = p.skeleton()
    directed = set(p.directed)
    undirected = set(p.undirected)
    clashes = [(a, b) for a, b in background if (b, a) in background]
    if clashes:
        raise ClosureConflict("orientation", clashes)
    for a, b in background:
        if _pair(a, b) not in skel:
            raise GraphInputError(f"background edge {a}->{b} not on skeleton")
        if (b, a) in directed:
            raise ClosureConflict("orientation", [(a, b)])
        undirected.discard(_pair(a, b))
        directed.add((a, b))
    if topological_order(n, directed) is None:
        raise ClosureConflict("cycle", _cycle_edges(n, directed))

    adj = [set() for _ in range(n)]
    for a, b in skel:
        adj[a].add(b)
        adj[b].add(a)

    def is_dir(a, b):
        return (a, b) in directed

    def is_und(a, b):
        return _pair(a, b) in undirected

    def orient(a, b):
        undirected.discard(_pair(a, b))
        directed.add((a, b))

    changed = True
    while changed:
        changed = False
        for a, b in sorted(undirected):
            for x, y in ((a, b), (b, a)):
                if not is_und(x, y):
                    break
                if _meek_fires(x, y, adj, is_dir, is_und):
                    orient(x, y)
                    changed = True
                    break
    if topological_order(n, directed) is None:
        raise ClosureConflict("cycle", _cycle_edges(n, directed))
    return Pdag(n, frozenset(directed), frozenset(undirected))


def _meek_fires(x: int, y: int, adj, is_dir, is_und) -> bool:
    """Does any Meek rule orient the undirected edge x - y as x -> y?"""
    # R1: w -> x - y, w and y nonadjacent
    for w in adj[x]:
        if is_dir(w, x) and w != y and y not in adj[w]:
            return True
    # R2: x -> w -> y
    for w in adj[x]:
        if is_dir(x, w) and y in adj[w] and is_dir(w, y):
            return True
    # R3: x - w1 -> y, x - w2 -> y, w1 and w2 nonadjacent
    ws = [w for w in adj[x] if w != y and is_und(x, w) and y in adj[w] and is_dir(w, y)]
    for i in range(len(ws)):
        for j in range(i + 1, len(ws)):
            if ws[j] not in adj[ws[i]]:
                return True
    # R4: x - w2, w2 -> w1 -> y, x adjacent w1, w2 and y nonadjacent
    for w1 in adj[x]:
        if w1 == y or y not in adj[w1] or not is_dir(w1, y):
            continue
        for w2 in adj[x]:
            if w2 in (y, w1) or not is_und(x, w2):
                continue
            if w1 in adj[w2] and is_dir(w2, w1) and y not in adj[w2]:
                return True
    return False


def _cycle_edges(n: int, directed) -> set[tuple[int, int]]:
    """Edges lying on some directed cycle: (a, b) with a reachable from b."""
    ch: list[list[int]] = [[] for _ in range(n)]
    for a, b in directed:
        ch[a].append(b)

    def reach(src):
        seen, stack = {src}, [src]
        while stack:
            for c in ch[stack.pop()]:
                if c not in seen:
                    seen.add(c)
                    stack.append(c)
        return seen

    cache = {}
    out = set()
    for a, b in directed:
        if b not in cache:
            cache[b] = reach(b)
        if a in cache[b]:
            out.add((a, b))
    return out


def cpdag_of(g: Dag) -> Pdag:
    """Essential graph of the Markov equivalence class of ``g``."""
    vs = g.v_structures()
    compelled = set()
    for a, b, c in vs:
        compelled.add((a, b))
        compelled.add((c, b))
    und = g.skeleton() - {_pair(a, b) for a, b in compelled}
    return meek_close(Pdag(g.n, frozenset(compelled), frozenset(und)))


def pattern_of(p: Pdag) -> Pdag:
    """Keep only v-structure orientations of ``p``, then Meek-close.

    Falls back to the undirected skeleton if the kept orientations cannot be
    closed consistently.
    """
    skel = p.skeleton()
    keep = set()
    parents: dict[int, list[int]] = {}
    for a, b in p.directed:
        parents.setdefault(b, []).append(a)
    for b, pa in parents.items():
        for i in range(len(pa)):
            for j in range(i + 1, len(pa)):
                if _pair(pa[i], pa[j]) not in skel:
                    keep.add((pa[i], b))
                    keep.add((pa[j], b))
    base = Pdag(p.n, frozenset(), skel)
    try:
        return meek_close(base, keep)
    except ClosureConflict:
        return base


def possible_descendants(p: Pdag, v: int) -> set[int]:
    """Nodes reachable from ``v`` along semi-directed paths."""
    _check_range(p.n, [v])
    nxt: list[list[int]] = [[] for _ in range(p.n)]
    for a, b in p.directed:
        nxt[a].append(b)
    for a, b in p.undirected:
        nxt[a].append(b)
        nxt[b].append(a)
    seen: set[int] = set()
    stack = list(nxt[v])
    while stack:
        u = stack.pop()
        if u != v and u not in seen:
            seen.add(u)
            stack.extend(nxt[u])
    return seen


def extensions(p: Pdag) -> list[Dag]:
    """All consistent DAG extensions of ``p`` (brute force; small graphs only).

    An extension orients every undirected edge, stays acyclic and creates no
    v-structure that ``p`` does not already have.
    """
    und = sorted(p.undirected)
    base_v = _directed_v_structures(p.n, p.directed, p.skeleton())
    out = []
    for mask in range(1 << len(und)):
        edges = set(p.directed)
        for i, (a, b) in enumerate(und):
            edges.add((a, b) if mask >> i & 1 else (b, a))
        if topological_order(p.n, edges) is None:
            continue
        if _directed_v_structures(p.n, edges, p.skeleton()) != base_v:
            continue
        out.append(Dag(p.n, frozenset(edges)))
    return out


def _directed_v_structures(n, directed, skel) -> set[tuple[int, int, int]]:
    parents: dict[int, list[int]] = {}
    for a, b in directed:
        parents.setdefault(b, []).append(a)
    out = set()
    for b, pa in parents.items():
        pa = sorted(pa)
        for i in range(len(pa)):
            for j in range(i + 1, len(pa)):
                if _pair(pa[i], pa[j]) not in skel:
                    out.add((pa[i], b, pa[j]))
    return out


# ---------------------------------------------------------------------------
# evaluation


@dataclass
class EvalReport:
    shd: int
    precision: float
    recall: float
    f1: float
    per_graph: list["EvalReport"] = field(default_factory=list)

    def line(self) -> str:
        return (
            f"shd={self.shd} f1={self.f1:.4f} "
            f"precision={self.precision:.4f} recall={self.recall:.4f}"
        )


def adjacency_matrix(g: GraphLike) -> np.ndarray:
    """Directed adjacency; an undirected edge appears in both directions."""
    A = np.zeros((g.n, g.n), dtype=bool)
    for a, b in g.edges if isinstance(g, Dag) else g.directed:
        A[a, b] = True
    if isinstance(g, Pdag):
        for a, b in g.undirected:
            A[a, b] = A[b, a] = True
    return A


def evaluate(pred: GraphLike, truth: Dag) -> EvalReport:
    if pred.n != truth.n:
        raise GraphInputError(f"size mismatch: {pred.n} vs {truth.n}")
    P = adjacency_matrix(pred)
    T = adjacency_matrix(truth)
    shd = 0
    for i in range(truth.n):
        for j in range(i + 1, truth.n):
            if (P[i, j], P[j, i]) != (T[i, j], T[j, i]):
                shd += 1
    off = ~np.eye(truth.n, dtype=bool)
    tp = int((P & T & off).sum())
    npred = int((P & off).sum())
    ntrue = int((T & off).sum())
    precision = tp / npred if npred else 0.0
    recall = tp / ntrue if ntrue else 0.0
    if npred == 0 and ntrue == 0:
        precision = recall = 1.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return EvalReport(shd, precision, recall, f1)


def directed_edges(g: GraphLike) -> frozenset[tuple[int, int]]:
    return g.edges if isinstance(g, Dag) else g.directed
