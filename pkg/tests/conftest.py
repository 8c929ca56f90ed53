"""Shared fixtures and brute-force oracles written independently of the package."""
from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import strategies as st

from kgs.graph import Dag, Pdag


def _acyclic(d, edges):
    # Kahn's algorithm on a plain adjacency list
    indeg = [0] * d
    out = [[] for _ in range(d)]
    for a, b in edges:
        out[a].append(b)
        indeg[b] += 1
    stack = [i for i in range(d) if indeg[i] == 0]
    seen = 0
    while stack:
        v = stack.pop()
        seen += 1
        for w in out[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                stack.append(w)
    return seen == d


def all_dags(d):
    """Every labelled DAG on d nodes as a frozenset of (parent, child) pairs."""
    pairs = list(itertools.combinations(range(d), 2))
    for states in itertools.product((0, 1, 2), repeat=len(pairs)):
        edges = []
        for (a, b), s in zip(pairs, states):
            if s == 1:
                edges.append((a, b))
            elif s == 2:
                edges.append((b, a))
        if _acyclic(d, edges):
            yield frozenset(edges)


def skeleton_of(edges):
    return frozenset(frozenset(e) for e in edges)


def vstructs_of(edges):
    skel = skeleton_of(edges)
    parents = {}
    for a, b in edges:
        parents.setdefault(b, set()).add(a)
    out = set()
    for c, pa in parents.items():
        for a, b in itertools.combinations(sorted(pa), 2):
            if frozenset((a, b)) not in skel:
                out.add((a, c, b))
    return frozenset(out)


def equivalence_classes(d):
    classes = {}
    for g in all_dags(d):
        classes.setdefault((skeleton_of(g), vstructs_of(g)), []).append(g)
    return classes


def class_cpdag(d, members):
    """Directed where every member agrees, undirected otherwise."""
    first = members[0]
    directed, undirected = [], []
    for a, b in first:
        if all((a, b) in m for m in members):
            directed.append((a, b))
        else:
            undirected.append((min(a, b), max(a, b)))
    return Pdag(d, directed, undirected)


@pytest.fixture(scope="session")
def classes3():
    return equivalence_classes(3)


@pytest.fixture(scope="session")
def classes4():
    return equivalence_classes(4)


@st.composite
def dags(draw, min_d=1, max_d=6):
    """Random DAG: random order, random forward edges."""
    d = draw(st.integers(min_d, max_d))
    order = draw(st.permutations(range(d)))
    edges = []
    for i in range(d):
        for j in range(i + 1, d):
            if draw(st.booleans()):
                edges.append((order[i], order[j]))
    return Dag(d, edges)


def linear_data(edges, d, n, seed, w=1.0):
    """Gaussian linear SEM data for a DAG given in topological index order."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    for j in range(d):
        for a, b in sorted(edges):
            if b == j:
                X[:, j] += w * X[:, a]
    return X
