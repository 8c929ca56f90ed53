"""Prior causal-edge knowledge: encoding, sampling and admissibility predicates.

A knowledge matrix ``codes`` is ``d x d`` with entries::

    0  nothing known
    1  directed edge i -> j is known to exist
    2  edge i -> j is forbidden
    3  i and j are adjacent, direction unknown (stored symmetrically)

A directed prior ``i -> j`` also forbids ``j -> i``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

import numpy as np

from . import _kernels
from .errors import (
    ConflictingKnowledge,
    NoConsistentExtension,
    OrientationConflict,
    CyclicKnowledge,
    InsufficientPairs,
    ParseError,
    TooLarge,
)
from .graph import (
    Cpdag,
    Dag,
    Pdag,
    apply_meek_rules,
    dag_to_cpdag,
    is_acyclic,
    pdag_to_dag,
    topological_order,
)

NONE, DIRECTED, FORBIDDEN, UNDECIDED = 0, 1, 2, 3

Kind = Literal["directed", "forbidden", "undecided"]


@dataclass(frozen=True, order=True)
class EdgeConstraint:
    kind: Kind
    src: int
    dst: int

    def __post_init__(self):
        if self.kind not in ("directed", "forbidden", "undecided"):
            raise ValueError(f"unknown constraint kind {self.kind!r}")
        if self.src == self.dst:
            raise ValueError("constraint endpoints must differ")
        if self.kind == "undecided" and self.src > self.dst:
            a, b = self.dst, self.src
            object.__setattr__(self, "src", a)
            object.__setattr__(self, "dst", b)


class KnowledgeMatrix:
    """Immutable coded prior-edge matrix."""

    __slots__ = ("d", "codes")

    def __init__(self, codes):
        codes = np.array(codes, dtype=np.int64, copy=True)
        if codes.ndim != 2 or codes.shape[0] != codes.shape[1]:
            raise ValueError("knowledge codes must be a square matrix")
        if codes.size and (codes.min() < 0 or codes.max() > 3):
            raise ValueError("knowledge codes must lie in {0, 1, 2, 3}")
        if np.diagonal(codes).any():
            raise ValueError("knowledge codes must have a zero diagonal")
        if not np.array_equal(codes == UNDECIDED, (codes == UNDECIDED).T):
            raise ValueError("undecided codes must be symmetric")
        if np.any((codes == DIRECTED) & (codes.T != FORBIDDEN)):
            raise ValueError("a directed code needs the reverse entry forbidden")
        codes.setflags(write=False)
        self.d = codes.shape[0]
        self.codes = codes

    @classmethod
    def empty(cls, d: int) -> "KnowledgeMatrix":
        return cls(np.zeros((d, d), dtype=np.int64))

    def __eq__(self, other):
        if not isinstance(other, KnowledgeMatrix):
            return NotImplemented
        return self.d == other.d and bool(np.array_equal(self.codes, other.codes))

    def __hash__(self):
        return hash(self.codes.tobytes())

    def __repr__(self):
        return f"KnowledgeMatrix(d={self.d}, constraints={len(self.constraints())})"

    @property
    def is_empty(self) -> bool:
        return not self.codes.any()

    def directed_edges(self) -> list[tuple[int, int]]:
        return [tuple(map(int, e)) for e in np.argwhere(self.codes == DIRECTED)]

    def undecided_pairs(self) -> list[tuple[int, int]]:
        return [(int(i), int(j)) for i, j in np.argwhere(self.codes == UNDECIDED) if i < j]

    def forbidden_edges(self) -> list[tuple[int, int]]:
        """Explicitly forbidden ordered pairs, excluding reverses of directed priors."""
        c = self.codes
        return [(int(i), int(j)) for i, j in np.argwhere(c == FORBIDDEN) if c[j, i] != DIRECTED]

    def constraints(self) -> list[EdgeConstraint]:
        out = [EdgeConstraint("directed", i, j) for i, j in self.directed_edges()]
        out += [EdgeConstraint("forbidden", i, j) for i, j in self.forbidden_edges()]
        out += [EdgeConstraint("undecided", i, j) for i, j in self.undecided_pairs()]
        return sorted(out)

    def required_orientation(self, a: int, b: int) -> bool:
        """True if an edge between a and b, when present, must point a -> b."""
        return self.codes[b, a] == FORBIDDEN and self.codes[a, b] != FORBIDDEN

    def both_forbidden(self, a: int, b: int) -> bool:
        return self.codes[a, b] == FORBIDDEN and self.codes[b, a] == FORBIDDEN


def _set(codes: np.ndarray, i: int, j: int, value: int) -> None:
    cur = codes[i, j]
    if cur not in (NONE, value):
        raise ConflictingKnowledge(f"pair ({i}, {j}) carries codes {cur} and {value}")
    codes[i, j] = value


def build_knowledge(constraints: Iterable[EdgeConstraint], d: int) -> KnowledgeMatrix:
    codes = np.zeros((d, d), dtype=np.int64)
    for c in constraints:
        i, j = c.src, c.dst
        if not (0 <= i < d and 0 <= j < d):
            raise ValueError(f"constraint {c} out of range for d={d}")
        if c.kind == "directed":
            _set(codes, i, j, DIRECTED)
            _set(codes, j, i, FORBIDDEN)
        elif c.kind == "forbidden":
            _set(codes, i, j, FORBIDDEN)
        else:
            _set(codes, i, j, UNDECIDED)
            _set(codes, j, i, UNDECIDED)
    if not is_acyclic(Dag(d, [tuple(e) for e in np.argwhere(codes == DIRECTED)])):
        raise CyclicKnowledge("directed prior edges form a cycle")
    return KnowledgeMatrix(codes)


# -- predicates used by the search ----------------------------------------------
def insert_allowed(K: KnowledgeMatrix, x: int, y: int, as_undirected: bool = False) -> bool:
    if as_undirected:
        return not K.both_forbidden(x, y)
    return K.codes[x, y] != FORBIDDEN


def delete_allowed(K: KnowledgeMatrix, x: int, y: int) -> bool:
    return K.codes[x, y] not in (DIRECTED, UNDECIDED)


def initial_cpdag(K: KnowledgeMatrix) -> Cpdag:
    """Starting state holding the known directed and undecided edges, Meek-closed.

    If the undecided edges admit no extension without new v-structures (a
    chordless cycle of true edges, say), they are oriented along a
    topological order of the directed priors and the start is that DAG's
    class, re-oriented by K.
    """
    p = Pdag(K.d, K.directed_edges(), K.undecided_pairs())
    try:
        p = apply_meek_rules(p)
        pdag_to_dag(p)
        return Cpdag.from_pdag(p)
    except (OrientationConflict, NoConsistentExtension):
        if not K.undecided_pairs():
            raise
    rank = {v: i for i, v in enumerate(topological_order(Dag(K.d, K.directed_edges())))}
    edges = K.directed_edges() + [(a, b) if rank[a] < rank[b] else (b, a) for a, b in K.undecided_pairs()]
    cpdag = dag_to_cpdag(Dag(K.d, edges))
    directed = set(cpdag.directed)
    undirected = set()
    for a, b in cpdag.undirected:
        if K.required_orientation(a, b):
            directed.add((a, b))
        elif K.required_orientation(b, a):
            directed.add((b, a))
        else:
            undirected.add((a, b))
    return Cpdag.from_pdag(apply_meek_rules(Pdag(K.d, directed, undirected)))


def satisfies(K: KnowledgeMatrix, g: Pdag) -> bool:
    """Every K directed/undecided edge present (directed ones oriented), no forbidden edge present."""
    for i, j in K.directed_edges():
        if (i, j) not in g.directed:
            return False
    for i, j in K.undecided_pairs():
        if not g.is_adjacent(i, j):
            return False
    for i, j in np.argwhere(K.codes == FORBIDDEN):
        if (int(i), int(j)) in g.directed:
            return False
        if K.both_forbidden(int(i), int(j)) and g.is_adjacent(int(i), int(j)):
            return False
    return True


MAX_ENUM_D = 5


def count_consistent_dags(d: int, K: KnowledgeMatrix | None = None) -> int:
    """Number of labelled DAGs on ``d`` nodes satisfying every constraint in K."""
    if d > MAX_ENUM_D:
        raise TooLarge(f"exhaustive enumeration limited to d <= {MAX_ENUM_D}")
    if K is None:
        K = KnowledgeMatrix.empty(d)
    if K.d != d:
        raise ValueError("knowledge matrix size does not match d")
    return _kernels.count_dags(d, np.ascontiguousarray(K.codes))


# -- sampling from a ground truth -----------------------------------------------
def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5 + 1e-9))


def sample_knowledge(
    truth: Dag,
    kind: Literal["d", "f", "u", "c"],
    fraction: float,
    rng_seed: int | np.random.SeedSequence,
) -> list[EdgeConstraint]:
    """Sample true constraints from a ground-truth DAG.

    The draws are made in a fixed order irrespective of ``kind`` and
    ``fraction``, so larger fractions extend smaller ones with the same seed.
    """
    if kind not in ("d", "f", "u", "c"):
        raise ValueError(f"unknown knowledge kind {kind!r}")
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must lie in [0, 1]")
    edges = sorted(truth.edges)
    m = round_half_up(fraction * len(edges))
    skel = truth.skeleton()
    nonadj = [(i, j) for i in range(truth.d) for j in range(i + 1, truth.d) if (i, j) not in skel]

    rng = np.random.default_rng(rng_seed)
    edge_perm = rng.permutation(len(edges))
    coins = rng.random(len(edges)) < 0.5
    pair_perm = rng.permutation(len(nonadj))

    def forbid(k: int) -> list[EdgeConstraint]:
        if k > len(nonadj):
            raise InsufficientPairs(f"need {k} nonadjacent pairs, truth has {len(nonadj)}")
        out = []
        for idx in pair_perm[:k]:
            a, b = nonadj[idx]
            out += [EdgeConstraint("forbidden", a, b), EdgeConstraint("forbidden", b, a)]
        return out

    picked = [edges[i] for i in edge_perm[:m]]
    if kind == "d":
        return [EdgeConstraint("directed", a, b) for a, b in picked]
    if kind == "u":
        return [EdgeConstraint("undecided", a, b) for a, b in picked]
    if kind == "f":
        return forbid(m)
    out = [
        EdgeConstraint("directed" if coins[i] else "undecided", *edges[i])
        for i in edge_perm[:m]
    ]
    return out + forbid(math.ceil(m / 2))


# -- knowledge text format --------------------------------------------------------
_OPS = {"->": "directed", "!>": "forbidden", "!-": "forbidden2", "--": "undecided"}
_SYMBOL = {"directed": "->", "forbidden": "!>", "undecided": "--"}


def parse_knowledge(text: str, names: Sequence[str]) -> list[EdgeConstraint]:
    index = {n: i for i, n in enumerate(names)}
    out: list[EdgeConstraint] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        toks = line.split()
        if not toks:
            continue
        if len(toks) != 3 or toks[1] not in _OPS:
            raise ParseError(f"line {lineno}: expected 'A -> B', 'A !> B', 'A !- B' or 'A -- B', got {raw.strip()!r}")
        op_at = line.index(toks[1], line.index(toks[0]) + len(toks[0]))
        cols = (line.index(toks[0]) + 1, line.index(toks[2], op_at + len(toks[1])) + 1)
        for t, col in zip((toks[0], toks[2]), cols):
            if t not in index:
                raise ParseError(f"line {lineno}, column {col}: unknown variable {t!r}")
        a, b = index[toks[0]], index[toks[2]]
        if a == b:
            raise ParseError(f"line {lineno}: constraint on a single variable {toks[0]!r}")
        op = _OPS[toks[1]]
        if op == "forbidden2":
            out += [EdgeConstraint("forbidden", a, b), EdgeConstraint("forbidden", b, a)]
        else:
            out.append(EdgeConstraint(op, a, b))
    return out


def format_knowledge(constraints: Iterable[EdgeConstraint], names: Sequence[str]) -> str:
    lines = [f"{names[c.src]} {_SYMBOL[c.kind]} {names[c.dst]}" for c in constraints]
    return "\n".join(lines) + ("\n" if lines else "")


def read_knowledge(path, names: Sequence[str]) -> list[EdgeConstraint]:
    with open(path, encoding="utf-8") as fh:
        return parse_knowledge(fh.read(), names)
