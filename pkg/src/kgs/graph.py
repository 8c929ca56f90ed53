"""Graph values (DAG, PDAG, CPDAG) and the equivalence-class algebra.

Nodes are integer indices ``0 .. d-1``.  Directed edges are ordered pairs
``(parent, child)``; undirected edges are unordered pairs stored with the
smaller index first.  Graph values are immutable: every operation returns a
new graph.
"""
from __future__ import annotations

import heapq
from collections import deque
from typing import Iterable, Sequence

from .errors import CyclicGraph, NoConsistentExtension, OrientationConflict, ParseError

Edge = tuple[int, int]

# Edge marks between an ordered pair (a, b), used by metrics and enumeration.
NONE, FORWARD, BACKWARD, UNDIRECTED = 0, 1, 2, 3


def _pair(a: int, b: int) -> Edge:
    return (a, b) if a < b else (b, a)


class Pdag:
    """Partially directed graph over ``d`` nodes.

    Holds the edge sets together with per-node parent/child/neighbor
    indices so adjacency queries are O(1).
    """

    __slots__ = ("d", "directed", "undirected", "_parents", "_children", "_neighbors")

    def __init__(self, d: int, directed: Iterable[Edge] = (), undirected: Iterable[Edge] = ()):
        d = int(d)
        if d < 0:
            raise ValueError("node count must be non-negative")
        parents: list[set[int]] = [set() for _ in range(d)]
        children: list[set[int]] = [set() for _ in range(d)]
        neighbors: list[set[int]] = [set() for _ in range(d)]
        dir_set: set[Edge] = set()
        und_set: set[Edge] = set()
        seen: set[Edge] = set()
        for a, b in directed:
            a, b = int(a), int(b)
            self._check(d, a, b)
            key = _pair(a, b)
            if key in seen:
                raise ValueError(f"more than one edge between {a} and {b}")
            seen.add(key)
            dir_set.add((a, b))
            parents[b].add(a)
            children[a].add(b)
        for a, b in undirected:
            a, b = int(a), int(b)
            self._check(d, a, b)
            key = _pair(a, b)
            if key in seen:
                raise ValueError(f"more than one edge between {a} and {b}")
            seen.add(key)
            und_set.add(key)
            neighbors[a].add(b)
            neighbors[b].add(a)
        self.d = d
        self.directed: frozenset[Edge] = frozenset(dir_set)
        self.undirected: frozenset[Edge] = frozenset(und_set)
        self._parents = tuple(frozenset(s) for s in parents)
        self._children = tuple(frozenset(s) for s in children)
        self._neighbors = tuple(frozenset(s) for s in neighbors)

    @staticmethod
    def _check(d: int, a: int, b: int) -> None:
        if not (0 <= a < d and 0 <= b < d):
            raise ValueError(f"edge ({a}, {b}) out of range for d={d}")
        if a == b:
            raise ValueError(f"self-loop on node {a}")

    # -- queries -----------------------------------------------------------
    def parents(self, i: int) -> frozenset[int]:
        return self._parents[i]

    def children(self, i: int) -> frozenset[int]:
        return self._children[i]

    def neighbors(self, i: int) -> frozenset[int]:
        """Nodes joined to ``i`` by an undirected edge."""
        return self._neighbors[i]

    def adjacent(self, i: int) -> frozenset[int]:
        return self._parents[i] | self._children[i] | self._neighbors[i]

    def is_adjacent(self, a: int, b: int) -> bool:
        return b in self._parents[a] or b in self._children[a] or b in self._neighbors[a]

    def mark(self, a: int, b: int) -> int:
        if b in self._children[a]:
            return FORWARD
        if b in self._parents[a]:
            return BACKWARD
        if b in self._neighbors[a]:
            return UNDIRECTED
        return NONE

    def skeleton(self) -> frozenset[Edge]:
        return frozenset(_pair(a, b) for a, b in self.directed) | self.undirected

    @property
    def n_edges(self) -> int:
        return len(self.directed) + len(self.undirected)

    # -- value semantics ---------------------------------------------------
    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Pdag):
            return NotImplemented
        return self.d == other.d and self.directed == other.directed and self.undirected == other.undirected

    def __hash__(self) -> int:
        return hash((self.d, self.directed, self.undirected))

    def __repr__(self) -> str:
        parts = [f"{a}->{b}" for a, b in sorted(self.directed)]
        parts += [f"{a}--{b}" for a, b in sorted(self.undirected)]
        return f"{type(self).__name__}(d={self.d}, [{', '.join(parts)}])"


class Dag(Pdag):
    """Fully directed graph.  Acyclicity is checked by :func:`is_acyclic`, not on construction."""

    __slots__ = ()

    def __init__(self, d: int, edges: Iterable[Edge] = ()):
        super().__init__(d, directed=edges)

    @property
    def edges(self) -> frozenset[Edge]:
        return self.directed


class Cpdag(Pdag):
    __slots__ = ()

    @classmethod
    def from_pdag(cls, p: Pdag) -> "Cpdag":
        return cls(p.d, p.directed, p.undirected)


# -- mutable working copy used by the closure / extension algorithms --------
class _Work:
    __slots__ = ("d", "par", "chi", "nbr")

    def __init__(self, p: Pdag):
        self.d = p.d
        self.par = [set(p.parents(i)) for i in range(p.d)]
        self.chi = [set(p.children(i)) for i in range(p.d)]
        self.nbr = [set(p.neighbors(i)) for i in range(p.d)]

    def adj(self, a: int, b: int) -> bool:
        return b in self.par[a] or b in self.chi[a] or b in self.nbr[a]

    def adjacent(self, a: int) -> set[int]:
        return self.par[a] | self.chi[a] | self.nbr[a]

    def orient(self, a: int, b: int) -> None:
        self.nbr[a].discard(b)
        self.nbr[b].discard(a)
        self.chi[a].add(b)
        self.par[b].add(a)

    def remove_node(self, x: int) -> None:
        for p in self.par[x]:
            self.chi[p].discard(x)
        for c in self.chi[x]:
            self.par[c].discard(x)
        for n in self.nbr[x]:
            self.nbr[n].discard(x)
        self.par[x].clear()
        self.chi[x].clear()
        self.nbr[x].clear()

    def freeze(self, cls: type = Pdag) -> Pdag:
        directed = [(a, b) for a in range(self.d) for b in self.chi[a]]
        undirected = [(a, b) for a in range(self.d) for b in self.nbr[a] if a < b]
        return cls(self.d, directed, undirected)


# -- acyclicity and ordering --------------------------------------------------
def topological_order(g: Pdag) -> list[int]:
    """Parents before children over the directed part; ties by ascending index."""
    indeg = [len(g.parents(i)) for i in range(g.d)]
    heap = [i for i in range(g.d) if indeg[i] == 0]
    heapq.heapify(heap)
    order: list[int] = []
    while heap:
        i = heapq.heappop(heap)
        order.append(i)
        for c in g.children(i):
            indeg[c] -= 1
            if indeg[c] == 0:
                heapq.heappush(heap, c)
    if len(order) != g.d:
        raise CyclicGraph("graph contains a directed cycle")
    return order


def is_acyclic(g: Pdag) -> bool:
    try:
        topological_order(g)
    except CyclicGraph:
        return False
    return True


def v_structures(g: Pdag) -> frozenset[tuple[int, int, int]]:
    """Triples ``(a, c, b)`` with ``a -> c <- b``, ``a < b`` and a, b nonadjacent."""
    out = set()
    for c in range(g.d):
        pa = sorted(g.parents(c))
        for i, a in enumerate(pa):
            for b in pa[i + 1:]:
                if not g.is_adjacent(a, b):
                    out.add((a, c, b))
    return frozenset(out)


def is_clique(g: Pdag, nodes: Iterable[int]) -> bool:
    nodes = list(nodes)
    for i, a in enumerate(nodes):
        for b in nodes[i + 1:]:
            if not g.is_adjacent(a, b):
                return False
    return True


# -- Meek orientation rules ---------------------------------------------------
def _implies(w: _Work, a: int, b: int) -> bool:
    """True if some Meek rule orients the undirected edge a - b as a -> b."""
    # R1: c -> a, c and b nonadjacent
    for c in w.par[a]:
        if not w.adj(c, b):
            return True
    # R2: a -> c -> b
    if w.chi[a] & w.par[b]:
        return True
    # R3: a - c -> b, a - d -> b, c and d nonadjacent
    cands = sorted(w.nbr[a] & w.par[b])
    for i, c in enumerate(cands):
        for d_ in cands[i + 1:]:
            if not w.adj(c, d_):
                return True
    # R4: a - c -> d -> b, c and b nonadjacent, a adjacent to d
    for c in w.nbr[a]:
        if c == b or w.adj(c, b):
            continue
        for d_ in w.chi[c]:
            if b in w.chi[d_] and w.adj(a, d_):
                return True
    return False


def _close(w: _Work) -> None:
    changed = True
    while changed:
        changed = False
        for a in range(w.d):
            for b in sorted(w.nbr[a]):
                if b < a or b not in w.nbr[a]:
                    continue
                fwd = _implies(w, a, b)
                bwd = _implies(w, b, a)
                if fwd and bwd:
                    raise OrientationConflict(f"rules orient {a} - {b} both ways")
                if fwd:
                    w.orient(a, b)
                    changed = True
                elif bwd:
                    w.orient(b, a)
                    changed = True


def apply_meek_rules(p: Pdag) -> Pdag:
    """Maximally orient ``p`` with Meek's rules R1-R4.

    Directed edges are never reversed and the skeleton is unchanged.
    Raises :class:`OrientationConflict` if a rule demands both orientations.
    """
    w = _Work(p)
    _close(w)
    return w.freeze(type(p) if type(p) is not Dag else Pdag)


# -- DAG <-> CPDAG ------------------------------------------------------------
def dag_to_cpdag(g: Pdag) -> Cpdag:
    """Completed PDAG of the Markov equivalence class of ``g``."""
    if g.undirected:
        raise ValueError("dag_to_cpdag expects a fully directed graph")
    if not is_acyclic(g):
        raise CyclicGraph("dag_to_cpdag on a cyclic graph")
    compelled = set()
    for a, c, b in v_structures(g):
        compelled.add((a, c))
        compelled.add((b, c))
    undirected = [e for e in g.directed if e not in compelled]
    w = _Work(Pdag(g.d, compelled, undirected))
    _close(w)
    return w.freeze(Cpdag)


def pdag_to_dag(p: Pdag) -> Dag:
    """Consistent extension by sink peeling (Dor & Tarsi).

    Repeatedly removes the lowest-index node that has no outgoing directed
    edge and whose undirected neighbours are adjacent to all its other
    adjacent nodes, orienting those undirected edges into it.
    """
    w = _Work(p)
    edges = set(p.directed)
    remaining = set(range(p.d))
    while remaining:
        for x in sorted(remaining):
            if w.chi[x]:
                continue
            adj_x = w.adjacent(x)
            if all(adj_x - {y} <= w.adjacent(y) for y in w.nbr[x]):
                break
        else:
            raise NoConsistentExtension("no consistent extension exists")
        for y in w.nbr[x]:
            edges.add((y, x))
        w.remove_node(x)
        remaining.discard(x)
    return Dag(p.d, edges)


def is_cpdag(p: Pdag) -> bool:
    try:
        return dag_to_cpdag(pdag_to_dag(p)) == p
    except (NoConsistentExtension, CyclicGraph):
        return False


# -- neighbourhood helpers for equivalence-class operators -------------------
def na_yx(c: Pdag, x: int, y: int) -> frozenset[int]:
    """Undirected neighbours of ``y`` that are adjacent to ``x``."""
    return frozenset(z for z in c.neighbors(y) if z != x and c.is_adjacent(z, x))


def has_semi_directed_path(c: Pdag, src: int, dst: int, blocked: Iterable[int] = ()) -> bool:
    """Path from ``src`` to ``dst`` along undirected or forward-directed edges avoiding ``blocked``."""
    blocked = set(blocked)
    seen = {src}
    queue = deque([src])
    while queue:
        u = queue.popleft()
        for v in c.children(u) | c.neighbors(u):
            if v == dst:
                return True
            if v in seen or v in blocked:
                continue
            seen.add(v)
            queue.append(v)
    return False


# -- edge-list text format ------------------------------------------------------
_EDGE_OPS = {"->": "directed", "--": "undirected"}


def parse_edge_list(text: str, names: Sequence[str] | None = None) -> tuple[Pdag, list[str]]:
    """Parse ``A -> B`` / ``A -- B`` lines.  A line holding a single name declares a node.

    With ``names`` given, every name must be one of them; otherwise node
    names are taken in order of first appearance.
    """
    fixed = names is not None
    name_list = list(names) if fixed else []
    index = {n: i for i, n in enumerate(name_list)}
    directed: list[Edge] = []
    undirected: list[Edge] = []

    def lookup(tok: str, lineno: int, col: int) -> int:
        if tok not in index:
            if fixed:
                raise ParseError(f"line {lineno}, column {col}: unknown node name {tok!r}")
            index[tok] = len(name_list)
            name_list.append(tok)
        return index[tok]

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        toks = line.split()
        if not toks:
            continue
        cols = []
        pos = 0
        for t in toks:
            pos = line.index(t, pos)
            cols.append(pos + 1)
            pos += len(t)
        if len(toks) == 1:
            lookup(toks[0], lineno, cols[0])
            continue
        if len(toks) != 3 or toks[1] not in _EDGE_OPS:
            raise ParseError(f"line {lineno}, column {cols[min(1, len(cols) - 1)]}: expected 'A -> B' or 'A -- B', got {raw.strip()!r}")
        a = lookup(toks[0], lineno, cols[0])
        b = lookup(toks[2], lineno, cols[2])
        if a == b:
            raise ParseError(f"line {lineno}, column {cols[2]}: self-loop on {toks[0]!r}")
        (directed if toks[1] == "->" else undirected).append((a, b))
    try:
        g = Pdag(len(name_list), directed, undirected)
    except ValueError as exc:
        raise ParseError(str(exc)) from exc
    if not undirected:
        g = Dag(g.d, g.directed)
    return g, name_list


def format_edge_list(g: Pdag, names: Sequence[str] | None = None) -> str:
    names = list(names) if names is not None else [f"X{i}" for i in range(g.d)]
    if len(names) != g.d:
        raise ValueError("names must have one entry per node")
    lines = [f"{names[a]} -> {names[b]}" for a, b in sorted(g.directed)]
    lines += [f"{names[a]} -- {names[b]}" for a, b in sorted(g.undirected)]
    lines += [names[i] for i in range(g.d) if not g.adjacent(i)]
    return "\n".join(lines) + ("\n" if lines else "")


def read_edge_list(path, names: Sequence[str] | None = None) -> tuple[Pdag, list[str]]:
    with open(path, encoding="utf-8") as fh:
        return parse_edge_list(fh.read(), names)


def write_edge_list(path, g: Pdag, names: Sequence[str] | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_edge_list(g, names))
