"""Support graphs and the structural statistics used by the certificates."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .numerics import SparseSymmetric

INFINITE = math.inf
PATH_CAP = 10**6


class _Overflow:
    """Marker for a simple-path count that exceeded its cap."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "OVERFLOW"

    def __reduce__(self):
        return (_Overflow, ())


OVERFLOW = _Overflow()


@dataclass(frozen=True)
class SupportGraph:
    """Undirected simple graph on ``d`` vertices with sorted neighbor lists."""

    d: int
    adjacency: tuple
    n_edges: int

    @classmethod
    def from_edges(cls, d, edges):
        e = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        if e.size and (np.any(e[:, 0] == e[:, 1]) or e.min() < 0 or e.max() >= d):
            raise ValueError("edges must join distinct vertices in range")
        lo, hi = np.minimum(e[:, 0], e[:, 1]), np.maximum(e[:, 0], e[:, 1])
        key = np.unique(lo * d + hi)
        lo, hi = key // d, key % d
        a = sp.coo_matrix((np.ones(2 * lo.size), (np.r_[lo, hi], np.r_[hi, lo])), shape=(d, d)).tocsr()
        a.sort_indices()
        adj = tuple(a.indices[a.indptr[i]:a.indptr[i + 1]].copy() for i in range(d))
        return cls(d, adj, int(lo.size))

    @classmethod
    def from_matrix(cls, m):
        """Edges at the off-diagonal nonzeros of ``m`` (sparse or dense)."""
        if isinstance(m, SparseSymmetric):
            return cls.from_edges(m.dim, m.edges)
        a = np.asarray(m)
        r, c = np.nonzero(np.triu(a != 0, k=1))
        return cls.from_edges(a.shape[0], np.column_stack([r, c]))

    def edge_list(self):
        return [(i, int(j)) for i in range(self.d) for j in self.adjacency[i] if i < j]

    def to_scipy(self):
        e = np.array(self.edge_list(), dtype=np.int64).reshape(-1, 2)
        r, c = np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]]
        return sp.csr_matrix((np.ones(r.size), (r, c)), shape=(self.d, self.d))

    def subgraph(self, vertices):
        """Induced subgraph, relabelled to ``0..len(vertices)-1`` in the given order."""
        vertices = np.asarray(vertices, dtype=np.int64)
        pos = {int(v): k for k, v in enumerate(vertices)}
        edges = [(pos[int(v)], pos[int(u)]) for v in vertices for u in self.adjacency[v]
                 if int(u) in pos and v < u]
        return SupportGraph.from_edges(vertices.size, edges)


def support_graph(m):
    return SupportGraph.from_matrix(m)


@dataclass(frozen=True)
class ComponentDecomposition:
    labels: np.ndarray
    components: tuple
    acyclic: tuple
    edge_counts: tuple

    @property
    def n_components(self):
        return len(self.components)

    @property
    def d_max(self):
        return max((c.size for c in self.components), default=0)

    def nontrivial(self):
        """Indices of components with at least one edge."""
        return [k for k, n in enumerate(self.edge_counts) if n > 0]


def decompose(g):
    """Connected components, each flagged acyclic when it has ``size - 1`` edges."""
    n, labels = connected_components(g.to_scipy(), directed=False)
    deg = np.array([a.size for a in g.adjacency], dtype=np.int64)
    order = np.argsort(labels, kind="stable")
    splits = np.flatnonzero(np.diff(labels[order])) + 1
    comps = np.split(order, splits) if g.d else []
    # relabel so component ids follow their smallest vertex
    comps.sort(key=lambda c: c[0])
    new_labels = np.empty(g.d, dtype=np.int64)
    for k, c in enumerate(comps):
        new_labels[c] = k
    edges = tuple(int(deg[c].sum() // 2) for c in comps)
    acyclic = tuple(e == c.size - 1 for e, c in zip(edges, comps))
    return ComponentDecomposition(new_labels, tuple(comps), acyclic, edges)


def max_degree(g):
    return max((a.size for a in g.adjacency), default=0)


def girth(g):
    """Length of the shortest cycle, or ``math.inf`` for a forest.

    BFS from every vertex of every cyclic component; a non-tree edge
    ``(u, w)`` seen from root ``r`` closes a walk of length
    ``dist[u] + dist[w] + 1`` and the minimum over roots is the girth.
    """
    dec = decompose(g)
    best = INFINITE
    dist = np.full(g.d, -1, dtype=np.int64)
    parent = np.full(g.d, -1, dtype=np.int64)
    for comp, acyc in zip(dec.components, dec.acyclic):
        if acyc:
            continue
        for root in comp:
            seen = [root]
            dist[root], parent[root] = 0, -1
            queue = deque([root])
            while queue:
                u = queue.popleft()
                if 2 * dist[u] + 1 >= best:
                    break
                for w in g.adjacency[u]:
                    if dist[w] < 0:
                        dist[w], parent[w] = dist[u] + 1, u
                        seen.append(w)
                        queue.append(w)
                    elif w != parent[u]:
                        best = min(best, int(dist[u] + dist[w] + 1))
            dist[seen] = -1
            parent[seen] = -1
    return best


def _enumerate_from(adj, wts, source, counts, sums, cap):
    """DFS over simple paths starting at ``source``; returns False on overflow."""
    on_path = np.zeros(len(adj), dtype=bool)
    on_path[source] = True
    stack = [[source, 0, 1.0]]
    while stack:
        top = stack[-1]
        v, idx, prod = top
        if idx < len(adj[v]):
            top[1] = idx + 1
            u = adj[v][idx]
            if on_path[u]:
                continue
            p = prod * wts[v][idx]
            counts[u] += 1
            sums[u] += p
            if counts[u] > cap:
                return False
            on_path[u] = True
            stack.append([u, 0, p])
        else:
            on_path[v] = False
            stack.pop()
    return True


def simple_path_stats(g, weights=None, cap=PATH_CAP):
    """Per-pair simple-path counts and weighted path sums.

    ``weights`` is a :class:`SparseSymmetric` whose off-diagonal entries give
    edge weights (unit weights when omitted). Returns ``(counts, sums)`` as
    dense ``d x d`` arrays with ``counts[i, i] = 0`` and ``sums[i, i] = 1``,
    or ``(OVERFLOW, None)`` once any pair exceeds ``cap`` paths. The weight of
    a path is the product of its edge weights.
    """
    d = g.d
    if weights is None:
        wts = [np.ones(a.size) for a in g.adjacency]
    else:
        wmat = {}
        for i, j, v in zip(weights.rows, weights.cols, weights.vals):
            wmat[(int(i), int(j))] = float(v)
        wts = [np.array([wmat.get((min(i, int(j)), max(i, int(j))), 0.0) for j in g.adjacency[i]])
               for i in range(d)]
    adj = [list(map(int, a)) for a in g.adjacency]
    counts = np.zeros((d, d), dtype=np.int64)
    sums = np.eye(d)
    dec = decompose(g)
    for comp, acyc in zip(dec.components, dec.acyclic):
        if comp.size < 2:
            continue
        for s in comp:
            if not _enumerate_from(adj, wts, int(s), counts[s], sums[s], cap):
                return OVERFLOW, None
    return counts, sums


def max_simple_paths(g, cap=PATH_CAP):
    """Maximum number of simple paths between any vertex pair, or ``OVERFLOW``.

    Forests short-circuit to 1 (0 when edgeless); cyclic components are
    enumerated exhaustively.
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    if g.n_edges == 0:
        return 0
    dec = decompose(g)
    best = 1
    for comp, acyc in zip(dec.components, dec.acyclic):
        if acyc:
            continue
        sub = g.subgraph(comp)
        counts, _ = simple_path_stats(sub, cap=cap)
        if counts is OVERFLOW:
            return OVERFLOW
        best = max(best, int(counts.max()))
    return best
