"""Greedy equivalence search with knowledge-guided operator pruning.

The search walks equivalence classes with the Insert(x, y, T) and
Delete(x, y, H) operators.  A knowledge matrix removes operators that would
add a forbidden edge, delete a known edge, or orient an edge against a known
direction.  Search states are knowledge-refined PDAGs: the CPDAG of the
current class with prior orientations applied and Meek-closed.  With an
all-zero matrix they are plain CPDAGs and the search is ordinary GES.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Callable, Iterator, Literal

from .errors import DimensionMismatch, NoConsistentExtension, OrientationConflict
from .graph import (
    Cpdag,
    Dag,
    Pdag,
    apply_meek_rules,
    dag_to_cpdag,
    has_semi_directed_path,
    is_clique,
    na_yx,
    pdag_to_dag,
    v_structures,
    _pair,
)
from .knowledge import (
    FORBIDDEN,
    KnowledgeMatrix,
    delete_allowed,
    initial_cpdag,
    insert_allowed,
    satisfies,
)
from .scoring import Dataset, graph_score

Phase = Literal["forward", "backward", "done"]


@dataclass(frozen=True)
class SearchConfig:
    epsilon: float = 1e-9
    max_steps: int | None = None  # per phase
    emit_trace: bool = False
    # Return the knowledge-refined PDAG instead of the class CPDAG.
    orient_with_knowledge: bool = False
    # Alternate forward/backward until neither phase moves; False is a single pass.
    iterate: bool = True
    on_step: Callable[["SearchState"], None] | None = field(default=None, compare=False)


@dataclass(frozen=True)
class SearchState:
    graph: Pdag
    score: float
    models_estimated: int = 1
    phase: Phase = "forward"
    forward_steps: int = 0
    backward_steps: int = 0
    candidates_evaluated: int = 0
    trace: tuple = ()


@dataclass(frozen=True)
class InsertCandidate:
    x: int
    y: int
    t_subset: tuple[int, ...]
    score_delta: float

    def key(self):
        return (-self.score_delta, self.x, self.y, len(self.t_subset), self.t_subset)


@dataclass(frozen=True)
class DeleteCandidate:
    x: int
    y: int
    h_subset: tuple[int, ...]
    score_delta: float

    def key(self):
        return (-self.score_delta, self.x, self.y, len(self.h_subset), self.h_subset)


@dataclass
class RunStats:
    final_score: float
    models_estimated: int
    forward_steps: int
    backward_steps: int
    wall_time: float
    candidates_evaluated: int = 0
    trace: list = field(default_factory=list)

    def as_dict(self, with_trace: bool = False) -> dict:
        out = {
            "final_score": self.final_score,
            "models_estimated": self.models_estimated,
            "forward_steps": self.forward_steps,
            "backward_steps": self.backward_steps,
            "candidates_evaluated": self.candidates_evaluated,
            "wall_time": self.wall_time,
        }
        if with_trace:
            out["trace"] = self.trace
        return out


def _subsets(items: list[int]) -> Iterator[tuple[int, ...]]:
    for k in range(len(items) + 1):
        yield from combinations(items, k)


# -- operator generation ----------------------------------------------------------
def generate_inserts(state: SearchState, data: Dataset, K: KnowledgeMatrix | None = None) -> list[InsertCandidate]:
    """All valid Insert(x, y, T) operators on the current state, filtered by K.

    The score change is ``s(y, Pa_y + NA_yx + T + x) - s(y, Pa_y + NA_yx + T)``.
    """
    g = state.graph
    sc = data.scorer
    out: list[InsertCandidate] = []
    for x in range(g.d):
        for y in range(g.d):
            if x == y or g.is_adjacent(x, y):
                continue
            if K is not None and not insert_allowed(K, x, y):
                continue
            na = na_yx(g, x, y)
            t0 = sorted(t for t in g.neighbors(y) if not g.is_adjacent(t, x))
            if K is not None:
                # T edges get oriented t -> y
                t0 = [t for t in t0 if K.codes[t, y] != FORBIDDEN]
            pa_y = g.parents(y)
            failed: list[frozenset[int]] = []
            for t in _subsets(t0):
                ts = frozenset(t)
                if any(f <= ts for f in failed):
                    continue
                nat = na | ts
                if not is_clique(g, nat):
                    failed.append(ts)
                    continue
                if has_semi_directed_path(g, y, x, nat):
                    continue
                base = pa_y | nat
                delta = sc.local(y, base | {x}) - sc.local(y, base)
                out.append(InsertCandidate(x, y, t, delta))
    return out


def generate_deletes(state: SearchState, data: Dataset, K: KnowledgeMatrix | None = None) -> list[DeleteCandidate]:
    """All valid Delete(x, y, H) operators on the current state, filtered by K.

    The score change is ``s(y, Pa_y + (NA_yx - H) - x) - s(y, Pa_y + (NA_yx - H) + x)``.
    """
    g = state.graph
    sc = data.scorer
    out: list[DeleteCandidate] = []
    for y in range(g.d):
        for x in sorted(g.parents(y) | g.neighbors(y)):
            if K is not None and not (delete_allowed(K, x, y) and delete_allowed(K, y, x)):
                continue
            na = na_yx(g, x, y)
            pa_y = g.parents(y)
            for h in _subsets(sorted(na)):
                rest = na - set(h)
                if not is_clique(g, rest):
                    continue
                if K is not None and not _delete_orientations_ok(g, K, x, y, h):
                    continue
                base = (pa_y | rest) - {x}
                delta = sc.local(y, base) - sc.local(y, base | {x})
                out.append(DeleteCandidate(x, y, h, delta))
    out.sort(key=lambda c: (c.x, c.y, len(c.h_subset), c.h_subset))
    return out


def _delete_orientations_ok(g: Pdag, K: KnowledgeMatrix, x: int, y: int, h: tuple[int, ...]) -> bool:
    for v in h:
        if K.codes[y, v] == FORBIDDEN:
            return False
        if v in g.neighbors(x) and K.codes[x, v] == FORBIDDEN:
            return False
    return True


# -- operator application -----------------------------------------------------------
def apply_insert(g: Pdag, c: InsertCandidate) -> Pdag:
    directed = set(g.directed) | {(c.x, c.y)} | {(t, c.y) for t in c.t_subset}
    undirected = set(g.undirected) - {_pair(t, c.y) for t in c.t_subset}
    return Pdag(g.d, directed, undirected)


def apply_delete(g: Pdag, c: DeleteCandidate) -> Pdag:
    x, y = c.x, c.y
    directed = set(g.directed) - {(x, y), (y, x)}
    undirected = set(g.undirected) - {_pair(x, y)}
    for h in c.h_subset:
        undirected.discard(_pair(y, h))
        directed.add((y, h))
        if h in g.neighbors(x):
            undirected.discard(_pair(x, h))
            directed.add((x, h))
    return Pdag(g.d, directed, undirected)


def refine(cpdag: Pdag, K: KnowledgeMatrix | None) -> Pdag:
    """Orient the undirected edges whose direction K fixes, then Meek-close."""
    if K is None:
        return cpdag
    directed = set(cpdag.directed)
    undirected = set()
    for a, b in cpdag.undirected:
        if K.required_orientation(a, b):
            directed.add((a, b))
        elif K.required_orientation(b, a):
            directed.add((b, a))
        else:
            undirected.add((a, b))
    if len(undirected) == len(cpdag.undirected):
        return cpdag
    return apply_meek_rules(Pdag(cpdag.d, directed, undirected))


def complete(p: Pdag, K: KnowledgeMatrix | None) -> tuple[Pdag, Dag] | None:
    """Re-derive a valid state from a post-operator PDAG.

    Returns ``(state_graph, representative_dag)``, or None when the operator
    leads to a class with no member consistent with K.
    """
    try:
        dag = pdag_to_dag(p)
    except NoConsistentExtension:
        return None
    cpdag = dag_to_cpdag(dag)
    if K is None:
        return cpdag, pdag_to_dag(cpdag)
    try:
        state = refine(cpdag, K)
        rep = pdag_to_dag(state)
    except (OrientationConflict, NoConsistentExtension):
        return None
    if state is not cpdag and v_structures(rep) != v_structures(dag):
        return None
    if not satisfies(K, state):
        return None
    if state is cpdag:
        state = Cpdag.from_pdag(state)
    return state, rep


# -- phases ---------------------------------------------------------------------
def _step_record(phase: str, cand, score: float) -> dict:
    is_ins = isinstance(cand, InsertCandidate)
    subset = cand.t_subset if is_ins else cand.h_subset
    return {
        "phase": phase,
        "operator": {"type": "insert" if is_ins else "delete", "x": cand.x, "y": cand.y, "subset": list(subset)},
        "delta": cand.score_delta,
        "score": score,
    }


def _greedy_step(state, data, K, cands, apply, eps):
    """Apply the best strictly-improving candidate that yields a valid state."""
    for cand in sorted((c for c in cands if c.score_delta > eps), key=lambda c: c.key()):
        done = complete(apply(state.graph, cand), K)
        if done is None:
            continue
        graph, rep = done
        score = graph_score(data, rep)
        if score - state.score <= eps:
            continue
        return cand, graph, score
    return None


def _run_phase(state: SearchState, data: Dataset, K, config: SearchConfig, phase: Phase) -> SearchState:
    config = config or SearchConfig()
    state = replace(state, phase=phase)
    gen, apply = (generate_inserts, apply_insert) if phase == "forward" else (generate_deletes, apply_delete)
    steps = 0
    while config.max_steps is None or steps < config.max_steps:
        cands = gen(state, data, K)
        state = replace(state, candidates_evaluated=state.candidates_evaluated + len(cands))
        picked = _greedy_step(state, data, K, cands, apply, config.epsilon)
        if picked is None:
            break
        cand, graph, score = picked
        steps += 1
        trace = state.trace + (_step_record(phase, cand, score),) if config.emit_trace else state.trace
        state = replace(
            state,
            graph=graph,
            score=score,
            models_estimated=state.models_estimated + 1,
            forward_steps=state.forward_steps + (phase == "forward"),
            backward_steps=state.backward_steps + (phase == "backward"),
            trace=trace,
        )
        if config.on_step is not None:
            config.on_step(state)
    return state


def forward_phase(state: SearchState, data: Dataset, K: KnowledgeMatrix | None = None, config: SearchConfig | None = None) -> SearchState:
    return _run_phase(state, data, K, config, "forward")


def backward_phase(state: SearchState, data: Dataset, K: KnowledgeMatrix | None = None, config: SearchConfig | None = None) -> SearchState:
    state = _run_phase(state, data, K, config, "backward")
    return replace(state, phase="done")


def _finish(state: SearchState, t0: float, config: SearchConfig) -> tuple[Pdag, RunStats]:
    if config.orient_with_knowledge:
        out = state.graph
    else:
        out = dag_to_cpdag(pdag_to_dag(state.graph))
    stats = RunStats(
        final_score=state.score,
        models_estimated=state.models_estimated,
        forward_steps=state.forward_steps,
        backward_steps=state.backward_steps,
        wall_time=time.perf_counter() - t0,
        candidates_evaluated=state.candidates_evaluated,
        trace=list(state.trace),
    )
    return out, stats


def initial_state(data: Dataset, K: KnowledgeMatrix | None) -> SearchState:
    g = initial_cpdag(K) if K is not None else Cpdag(data.d)
    return SearchState(graph=g, score=graph_score(data, pdag_to_dag(g)))


def search(data: Dataset, K: KnowledgeMatrix | None = None, config: SearchConfig | None = None) -> SearchState:
    """Run the forward and backward phases and return the converged state.

    ``K=None`` is plain GES: empty start and no knowledge checks at all.
    """
    config = config or SearchConfig()
    if K is not None and K.d != data.d:
        raise DimensionMismatch(f"knowledge is {K.d}x{K.d}, data has {data.d} columns")
    state = initial_state(data, K)
    if config.on_step is not None:
        config.on_step(state)
    state = forward_phase(state, data, K, config)
    state = backward_phase(state, data, K, config)
    while config.iterate and state.backward_steps:
        before = state.forward_steps
        state = forward_phase(state, data, K, config)
        if state.forward_steps == before:
            break
        state = backward_phase(state, data, K, config)
    return replace(state, phase="done")


def run_kgs(data: Dataset, K: KnowledgeMatrix | None = None, config: SearchConfig | None = None) -> tuple[Pdag, RunStats]:
    """Knowledge-guided GES: start from the prior edges, then forward and backward phases."""
    config = config or SearchConfig()
    if K is None:
        K = KnowledgeMatrix.empty(data.d)
    t0 = time.perf_counter()
    return _finish(search(data, K, config), t0, config)


def run_ges(data: Dataset, config: SearchConfig | None = None) -> tuple[Pdag, RunStats]:
    """Plain GES without any knowledge filtering."""
    config = config or SearchConfig()
    t0 = time.perf_counter()
    return _finish(search(data, None, config), t0, config)


def improving_operators(state: SearchState, data: Dataset, K: KnowledgeMatrix | None, epsilon: float = 1e-9) -> list:
    """Every applicable insert or delete that would raise the score by more than epsilon."""
    found = []
    for gen, apply in ((generate_inserts, apply_insert), (generate_deletes, apply_delete)):
        for cand in gen(state, data, K):
            if cand.score_delta <= epsilon:
                continue
            done = complete(apply(state.graph, cand), K)
            if done is None:
                continue
            if graph_score(data, done[1]) - state.score > epsilon:
                found.append(cand)
    return found


def trace_lines(stats: RunStats) -> str:
    return "".join(json.dumps(rec) + "\n" for rec in stats.trace)
