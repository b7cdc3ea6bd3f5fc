import itertools
import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from glx.graph import (
    INFINITE,
    OVERFLOW,
    SupportGraph,
    decompose,
    girth,
    max_degree,
    max_simple_paths,
    simple_path_stats,
    support_graph,
)
from glx.numerics import SparseSymmetric

from conftest import EX1


def brute_paths(d, edges, i, j):
    """All simple paths from i to j, by checking every vertex sequence."""
    es = {frozenset(e) for e in edges}
    others = [v for v in range(d) if v not in (i, j)]
    out = []
    for r in range(len(others) + 1):
        for mid in itertools.permutations(others, r):
            seq = (i, *mid, j)
            if all(frozenset(p) in es for p in zip(seq, seq[1:])):
                out.append(seq)
    return out


def brute_girth(d, edges):
    es = {frozenset(e) for e in edges}
    best = math.inf
    for r in range(3, d + 1):
        for seq in itertools.permutations(range(d), r):
            if seq[0] != min(seq):
                continue
            if all(frozenset(p) in es for p in zip(seq, seq[1:] + seq[:1])):
                best = min(best, r)
        if best < math.inf:
            return best
    return best


def cycle_edges(n):
    return [(i, (i + 1) % n) for i in range(n)]


def test_support_graph_examples():
    assert support_graph(np.diag([1.0, 2.0])).n_edges == 0
    assert support_graph(EX1).edge_list() == [(0, 1), (1, 2), (2, 3)]
    assert support_graph(SparseSymmetric.from_dense(EX1)).edge_list() == [(0, 1), (1, 2), (2, 3)]
    assert support_graph(np.ones((3, 3))).edge_list() == [(0, 1), (0, 2), (1, 2)]


def test_decompose_examples():
    dec = decompose(SupportGraph.from_edges(4, [(0, 1), (1, 2), (2, 3)]))
    assert dec.n_components == 1 and dec.acyclic == (True,) and dec.d_max == 4
    dec = decompose(SupportGraph.from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]))
    assert dec.n_components == 2 and dec.acyclic == (False, False) and dec.d_max == 3
    dec = decompose(SupportGraph.from_edges(5, []))
    assert dec.n_components == 5 and dec.d_max == 1


def test_girth_examples():
    assert girth(SupportGraph.from_edges(5, [(0, 1), (1, 2), (1, 3), (3, 4)])) == INFINITE
    c9 = cycle_edges(9)
    assert girth(SupportGraph.from_edges(9, c9)) == 9
    chord = c9 + [(0, 4)]
    assert girth(SupportGraph.from_edges(9, chord)) == 5 == brute_girth(9, chord)


def test_max_simple_paths_examples():
    assert max_simple_paths(SupportGraph.from_edges(4, [(0, 1), (1, 2), (1, 3)])) == 1
    for n in (3, 5, 8):
        assert max_simple_paths(SupportGraph.from_edges(n, cycle_edges(n))) == 2
    k4 = list(itertools.combinations(range(4), 2))
    assert max_simple_paths(SupportGraph.from_edges(4, k4)) == 5 == len(brute_paths(4, k4, 0, 1))
    k7 = list(itertools.combinations(range(7), 2))
    assert max_simple_paths(SupportGraph.from_edges(7, k7), cap=50) is OVERFLOW


def test_max_degree_examples():
    assert max_degree(SupportGraph.from_edges(3, [])) == 0
    assert max_degree(SupportGraph.from_edges(5, [(0, i) for i in range(1, 5)])) == 4
    assert max_degree(SupportGraph.from_edges(4, [(0, 1), (1, 2), (2, 3)])) == 2


graphs = st.integers(2, 6).flatmap(
    lambda d: st.tuples(st.just(d), st.lists(st.tuples(st.integers(0, d - 1), st.integers(0, d - 1))
                                                .filter(lambda e: e[0] != e[1]), max_size=12))
)


@settings(max_examples=150, deadline=None)
@given(graphs)
def test_path_counts_and_girth_match_brute_force(case):
    d, raw = case
    g = SupportGraph.from_edges(d, raw)
    edges = g.edge_list()
    dec = decompose(g)
    assert sorted(np.concatenate(dec.components).tolist()) == list(range(d))
    assert (girth(g) == INFINITE) == all(dec.acyclic)
    assert girth(g) == brute_girth(d, edges)
    counts, _ = simple_path_stats(g)
    best = 0
    for i, j in itertools.combinations(range(d), 2):
        n = len(brute_paths(d, edges, i, j))
        assert counts[i, j] == counts[j, i] == n
        best = max(best, n)
    pm = max_simple_paths(g)
    if edges:
        assert pm == best >= 1
        assert (pm == 1) == all(dec.acyclic)


@settings(max_examples=60, deadline=None)
@given(graphs, st.integers(0, 2**32 - 1))
def test_weighted_path_sums(case, seed):
    d, raw = case
    g = SupportGraph.from_edges(d, raw)
    edges = g.edge_list()
    rng = np.random.default_rng(seed)
    w = {e: rng.uniform(-0.9, 0.9) for e in edges}
    wm = SparseSymmetric.from_entries(d, [(i, j, v) for (i, j), v in w.items() if v != 0], np.zeros(d))
    _, sums = simple_path_stats(g, weights=wm)
    for i, j in itertools.combinations(range(d), 2):
        ref = sum(math.prod(w.get((min(a, b), max(a, b)), 0.0) for a, b in zip(p, p[1:]))
                  for p in brute_paths(d, edges, i, j))
        assert abs(sums[i, j] - ref) < 1e-12


@settings(max_examples=40, deadline=None)
@given(graphs, st.integers(0, 2**32 - 1))
def test_decompose_stable_under_relabeling(case, seed):
    d, raw = case
    g = SupportGraph.from_edges(d, raw)
    perm = np.random.default_rng(seed).permutation(d)
    h = SupportGraph.from_edges(d, [(perm[i], perm[j]) for i, j in g.edge_list()])
    parts_g = {frozenset(perm[c].tolist()) for c in decompose(g).components}
    parts_h = {frozenset(c.tolist()) for c in decompose(h).components}
    assert parts_g == parts_h
