import itertools
import json

import numpy as np
import pytest

from conftest import all_dags, equivalence_classes, linear_data
from kgs.errors import ConflictingKnowledge, CyclicGraph, CyclicKnowledge, DimensionMismatch
from kgs.graph import Dag, Pdag, dag_to_cpdag, pdag_to_dag
from kgs.knowledge import (
    EdgeConstraint,
    KnowledgeMatrix,
    build_knowledge,
    sample_knowledge,
    satisfies,
)
from kgs.scoring import Dataset, cpdag_score, graph_score
from kgs.search import (
    SearchConfig,
    SearchState,
    apply_delete,
    apply_insert,
    backward_phase,
    complete,
    generate_deletes,
    generate_inserts,
    improving_operators,
    initial_state,
    run_ges,
    run_kgs,
    search,
    trace_lines,
)
from kgs.synth import SemConfig, simulate


def state_of(data, g):
    return SearchState(graph=g, score=cpdag_score(data, g))


def noise(d, n=200, seed=0):
    return Dataset.from_array(np.random.default_rng(seed).normal(size=(n, d)))


class TestGenerateInserts:
    def test_empty_two_nodes(self):
        data = noise(2)
        cands = generate_inserts(state_of(data, Pdag(2)), data, KnowledgeMatrix.empty(2))
        assert {(c.x, c.y, c.t_subset) for c in cands} == {(0, 1, ()), (1, 0, ())}

    def test_both_forbidden_pair_skipped(self):
        data = noise(3)
        K = build_knowledge([EdgeConstraint("forbidden", 0, 1), EdgeConstraint("forbidden", 1, 0)], 3)
        cands = generate_inserts(state_of(data, Pdag(3)), data, K)
        assert not [c for c in cands if {c.x, c.y} == {0, 1}]
        assert len(cands) == 4

    def test_adjacent_pair_skipped(self):
        data = noise(3)
        cands = generate_inserts(state_of(data, Pdag(3, undirected=[(0, 1)])), data)
        assert not [c for c in cands if {c.x, c.y} == {0, 1}]

    def test_delta_is_local_difference(self):
        X = linear_data([(0, 1)], 2, 500, seed=1)
        data = Dataset.from_array(X)
        (c,) = [c for c in generate_inserts(state_of(data, Pdag(2)), data) if c.x == 0]
        expect = graph_score(data, Dag(2, [(0, 1)])) - graph_score(data, Dag(2))
        assert c.score_delta == pytest.approx(expect, rel=1e-12)


class TestGenerateDeletes:
    def test_empty_graph(self):
        data = noise(3)
        assert generate_deletes(state_of(data, Pdag(3)), data) == []

    def test_known_edge_protected(self):
        data = noise(2)
        K = build_knowledge([EdgeConstraint("directed", 0, 1)], 2)
        assert generate_deletes(state_of(data, Pdag(2, [(0, 1)])), data, K) == []

    def test_single_edge(self):
        data = noise(2)
        cands = generate_deletes(state_of(data, Pdag(2, [(0, 1)])), data, KnowledgeMatrix.empty(2))
        assert [(c.x, c.y, c.h_subset) for c in cands] == [(0, 1, ())]


def _classes_by_addition(members, d):
    out = set()
    for m in members:
        for a, b in itertools.permutations(range(d), 2):
            if (a, b) in m or (b, a) in m:
                continue
            g = m | {(a, b)}
            try:
                out.add(dag_to_cpdag(Dag(d, g)))
            except CyclicGraph:
                pass
    return out


def _classes_by_removal(members, d):
    return {dag_to_cpdag(Dag(d, m - {e})) for m in members for e in m}


@pytest.fixture(scope="module")
def classes4():
    return equivalence_classes(4)


class TestOperatorCompleteness:
    """Valid operators reach exactly the classes one edge away from some member DAG."""

    def test_inserts(self, classes4):
        data = noise(4)
        for members in classes4.values():
            c = dag_to_cpdag(Dag(4, members[0]))
            got = set()
            for cand in generate_inserts(state_of(data, c), data):
                done = complete(apply_insert(c, cand), None)
                assert done is not None
                got.add(done[0])
            assert got == _classes_by_addition(members, 4)

    def test_deletes(self, classes4):
        data = noise(4)
        for members in classes4.values():
            c = dag_to_cpdag(Dag(4, members[0]))
            got = set()
            for cand in generate_deletes(state_of(data, c), data):
                done = complete(apply_delete(c, cand), None)
                assert done is not None
                got.add(done[0])
            assert got == _classes_by_removal(members, 4)


class TestPruning:
    def test_candidates_stay_inside_the_consistent_space(self):
        # every d=3 knowledge set with one or two constraints, from the initial state
        data = Dataset.from_array(linear_data([(0, 1), (1, 2)], 3, 300, seed=2))
        kinds = []
        for a, b in itertools.permutations(range(3), 2):
            kinds += [EdgeConstraint("directed", a, b), EdgeConstraint("forbidden", a, b)]
            if a < b:
                kinds.append(EdgeConstraint("undecided", a, b))
        consistent_dags = list(all_dags(3))
        for r in (1, 2):
            for cs in itertools.combinations(kinds, r):
                try:
                    K = build_knowledge(cs, 3)
                except (ConflictingKnowledge, CyclicKnowledge):
                    continue
                allowed = {g for g in consistent_dags if satisfies(K, Dag(3, g))}
                st = initial_state(data, K)
                for gen, apply in ((generate_inserts, apply_insert), (generate_deletes, apply_delete)):
                    for cand in gen(st, data, K):
                        done = complete(apply(st.graph, cand), K)
                        if done is not None:
                            assert done[1].edges in allowed


class TestPhases:
    def test_strong_pair_one_edge(self):
        X = linear_data([(0, 1)], 2, 1000, seed=4)
        st = search(Dataset.from_array(X), KnowledgeMatrix.empty(2))
        assert st.graph.n_edges == 1 and st.forward_steps == 1 and st.backward_steps == 0

    def test_independent_zero_steps(self):
        g, stats = run_kgs(noise(2, 1000))
        assert g.n_edges == 0 and stats.models_estimated == 1

    def test_full_truth_knowledge(self):
        wd, data = simulate(SemConfig(d=6, e_target=6, n=2000, seed=3))
        K = build_knowledge([EdgeConstraint("directed", a, b) for a, b in wd.dag.edges], 6)
        st = search(data, K)
        assert wd.dag.edges <= st.graph.directed
        assert st.backward_steps == 0

    def test_spurious_edge_removed(self):
        X = linear_data([(0, 1), (1, 2)], 3, 2000, seed=5)
        data = Dataset.from_array(X)
        start = dag_to_cpdag(Dag(3, [(0, 1), (1, 2), (0, 2)]))
        st = backward_phase(state_of(data, start), data, KnowledgeMatrix.empty(3))
        assert st.backward_steps == 1
        assert st.graph.skeleton() == {(0, 1), (1, 2)}

    def test_protected_edges_never_deleted(self):
        data = noise(3, 1000)
        K = build_knowledge([EdgeConstraint("directed", 0, 1), EdgeConstraint("directed", 1, 2)], 3)
        st = search(data, K)
        assert st.backward_steps == 0
        assert {(0, 1), (1, 2)} <= st.graph.directed

    def test_max_steps(self):
        wd, data = simulate(SemConfig(d=6, e_target=8, n=1000, seed=1))
        st = search(data, None, SearchConfig(max_steps=1, iterate=False))
        assert st.forward_steps <= 1 and st.backward_steps <= 1

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            run_kgs(noise(3), KnowledgeMatrix.empty(4))


def _fixtures(count, d=8, e=12, n=1000):
    for seed in range(1, count + 1):
        yield seed, *simulate(SemConfig(d=d, e_target=e, n=n, seed=seed))


def _stats_key(stats):
    s = stats.as_dict(with_trace=True)
    s.pop("wall_time")
    return s


class TestReduction:
    @pytest.mark.parametrize("seed", range(1, 21))
    def test_empty_knowledge_equals_plain_ges(self, seed):
        _, data = simulate(SemConfig(d=8, e_target=12, n=500, seed=seed))
        cfg = SearchConfig(emit_trace=True)
        g1, s1 = run_kgs(data, KnowledgeMatrix.empty(8), cfg)
        g2, s2 = run_ges(data, cfg)
        assert g1 == g2
        assert _stats_key(s1) == _stats_key(s2)


class TestInvariants:
    @pytest.mark.parametrize("kind", ["d", "f", "u", "c"])
    def test_every_step_respects_knowledge_and_improves(self, kind):
        violations = 0
        for seed, wd, data in _fixtures(6):
            K = build_knowledge(sample_knowledge(wd.dag, kind, 0.3, seed), wd.dag.d)
            scores = []

            def check(st):
                nonlocal violations
                violations += not satisfies(K, st.graph)
                assert st.score == pytest.approx(graph_score(data, pdag_to_dag(st.graph)), abs=1e-9)
                scores.append(st.score)

            _, stats = run_kgs(data, K, SearchConfig(on_step=check))
            assert all(b > a for a, b in zip(scores, scores[1:]))
            assert stats.models_estimated == stats.forward_steps + stats.backward_steps + 1
            assert stats.models_estimated <= 1 + 2 * data.d * (data.d - 1)
        assert violations == 0

    @pytest.mark.parametrize("kind", ["ges", "d", "f", "u", "c"])
    def test_local_optimality_at_convergence(self, kind):
        for seed, wd, data in _fixtures(6, d=10, e=20):
            K = KnowledgeMatrix.empty(10) if kind == "ges" else build_knowledge(
                sample_knowledge(wd.dag, kind, 0.25, seed), 10)
            st = search(data, K)
            assert improving_operators(st, data, K) == []

    def test_deterministic(self):
        _, data = simulate(SemConfig(d=8, e_target=12, n=500, seed=9))
        a = run_ges(data, SearchConfig(emit_trace=True))
        b = run_ges(data, SearchConfig(emit_trace=True))
        assert a[0] == b[0] and _stats_key(a[1]) == _stats_key(b[1])

    def test_output_is_class_cpdag(self):
        wd, data = simulate(SemConfig(d=8, e_target=10, n=1000, seed=2))
        K = build_knowledge(sample_knowledge(wd.dag, "d", 0.5, 2), 8)
        g, _ = run_kgs(data, K)
        assert dag_to_cpdag(pdag_to_dag(g)) == g
        oriented, _ = run_kgs(data, K, SearchConfig(orient_with_knowledge=True))
        assert oriented.skeleton() == g.skeleton()
        assert satisfies(K, oriented)


def test_trace_lines():
    _, data = simulate(SemConfig(d=5, e_target=5, n=500, seed=1))
    _, stats = run_ges(data, SearchConfig(emit_trace=True))
    lines = trace_lines(stats).splitlines()
    assert len(lines) == stats.forward_steps + stats.backward_steps
    rec = json.loads(lines[0])
    assert set(rec) == {"phase", "operator", "delta", "score"}
    assert rec["phase"] == "forward" and rec["operator"]["type"] == "insert"


def test_matches_reference_ges_package():
    ges = pytest.importorskip("ges")
    for seed in range(1, 11):
        _, data = simulate(SemConfig(d=10, e_target=20, n=1000, seed=seed))
        g, _ = run_ges(data)
        A, _ = ges.fit_bic(data.values, phases=["forward", "backward"])
        directed = [(i, j) for i, j in zip(*np.nonzero(A)) if not A[j, i]]
        undirected = [(i, j) for i, j in zip(*np.nonzero(A)) if A[j, i] and i < j]
        assert g == Pdag(10, [(int(a), int(b)) for a, b in directed], [(int(a), int(b)) for a, b in undirected])
