"""Synthetic instance generators.

All randomness comes from numpy's Philox counter-based bit generator
seeded with the caller's integer seed; normal variates use numpy's
ziggurat sampler. Output is therefore bit-reproducible per seed.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .numerics import SparseSymmetric, cholesky, inverse

JITTER = 1e-9
NNZ_RTOL = 0.15


def rng_for(seed):
    """Philox-backed generator for ``seed``."""
    return np.random.Generator(np.random.Philox(seed))


@dataclass
class SyntheticInstance:
    true_precision: SparseSymmetric
    true_covariance: np.ndarray = field(repr=False)
    samples: Optional[np.ndarray] = field(default=None, repr=False)
    seed: Optional[int] = None

    @property
    def dim(self):
        return self.true_precision.dim


@dataclass
class CovarianceInstance:
    """A covariance with a recommended ``lam`` and the edges it is built around.

    ``lam_interval`` is the open interval of ``lam`` values whose residue
    support is exactly ``edges``.
    """

    sigma: np.ndarray = field(repr=False)
    lam: float
    lam_interval: tuple
    edges: list
    seed: Optional[int] = None
    kind: str = ""


def _draw_u(rng, d, q):
    mask = rng.random((d, d)) < q
    r, c = np.nonzero(mask)
    v = rng.choice(np.array([-1.0, 1.0]), size=r.size)
    return sp.csr_matrix((v, (r, c)), shape=(d, d))


def _offdiag_count(u):
    g = (u @ u.T).tocoo()
    keep = (g.row != g.col) & (g.data != 0)
    return int(keep.sum()), g.row[keep], g.col[keep], g.data[keep], g.diagonal()


def _density_for(d, target):
    p = min(target / (d * (d - 1)), 1 - 1e-12)
    return min(1.0, math.sqrt(-math.log1p(-p) / d))


def random_precision(d, target_nnz, seed=None):
    """Sparse precision ``U U^T + 2I`` with random ``+-1`` entries in ``U``.

    ``target_nnz`` counts off-diagonal nonzeros of the precision over
    both triangles. The density of ``U`` comes from the collision
    estimate ``1 - (1 - q^2)^d = target / (d(d-1))``; if the first draw
    misses by more than 15 % one corrective redraw is made with ``q``
    rescaled by the observed shortfall.
    """
    rng = rng_for(seed)
    if target_nnz <= 0 or d < 2:
        prec = SparseSymmetric.diagonal(np.full(d, 2.0))
        return SyntheticInstance(prec, np.eye(d) / 2.0, seed=seed)
    q = _density_for(d, target_nnz)
    u = _draw_u(rng, d, q)
    got = _offdiag_count(u)
    if got[0] and abs(got[0] - target_nnz) > NNZ_RTOL * target_nnz:
        q = min(1.0, q * math.sqrt(target_nnz / got[0]))
        u = _draw_u(rng, d, q)
        got = _offdiag_count(u)
    _, r, c, v, dg = got
    up = r < c
    prec = SparseSymmetric(d, r[up], c[up], v[up], np.asarray(dg, dtype=float) + 2.0)
    return SyntheticInstance(prec, inverse(prec.to_dense()), seed=seed)


def sample_gaussian(inst, n, seed=None):
    """``n`` draws from ``N(0, true_covariance)`` as an ``n x d`` array."""
    if n < 1:
        raise ValueError("n must be at least 1")
    low = cholesky(inst.true_covariance).lower
    z = rng_for(seed).standard_normal((n, inst.dim))
    return z @ low.T


def _prufer_tree(rng, d):
    if d == 2:
        return [(0, 1)]
    seq = rng.integers(0, d, size=d - 2)
    degree = np.ones(d, dtype=np.int64)
    np.add.at(degree, seq, 1)
    leaves = [i for i in range(d) if degree[i] == 1]
    heapq.heapify(leaves)
    edges = []
    for v in seq:
        leaf = heapq.heappop(leaves)
        edges.append((min(leaf, int(v)), max(leaf, int(v))))
        degree[v] -= 1
        if degree[v] == 1:
            heapq.heappush(leaves, int(v))
    a, b = heapq.heappop(leaves), heapq.heappop(leaves)
    edges.append((min(a, b), max(a, b)))
    return edges


def _untie(rng, s):
    """Break exact magnitude ties among off-diagonal entries with tiny jitter."""
    d = s.shape[0]
    iu = np.triu_indices(d, k=1)
    mags = np.abs(s[iu])
    if np.unique(mags).size < mags.size:
        jit = rng.uniform(-JITTER, JITTER, size=mags.size)
        vals = s[iu] + jit
        s[iu] = vals
        s[iu[1], iu[0]] = vals
    return s


TREE_LAM_MARGIN = 1e-3


def spanning_tree_covariance(d, seed=None, omega=0.02, lam_rule="edge"):
    """Unit-diagonal matrix with a strong random spanning tree.

    Tree entries have magnitude in ``[0.85, 0.95]`` with random sign;
    every other entry is uniform in ``[-0.85 + omega, 0.85 - omega]``.
    The returned ``lam_interval`` lies between the largest off-tree
    magnitude and the smallest tree magnitude. ``lam`` is
    ``0.85 - 1e-3`` for ``lam_rule="edge"``, which keeps the closed-form
    gap check satisfied, or the interval midpoint for ``"midpoint"``.
    """
    if d < 2:
        raise ValueError("d must be at least 2")
    if lam_rule not in ("edge", "midpoint"):
        raise ValueError(f"unknown lam_rule {lam_rule!r}")
    if omega <= 0.01:
        raise ValueError("omega must exceed 0.01")
    rng = rng_for(seed)
    lim = 0.85 - omega
    s = rng.uniform(-lim, lim, size=(d, d))
    s = np.triu(s, k=1)
    s = s + s.T
    edges = _prufer_tree(rng, d)
    r = np.array([e[0] for e in edges])
    c = np.array([e[1] for e in edges])
    vals = rng.uniform(0.85, 0.95, size=len(edges)) * rng.choice([-1.0, 1.0], size=len(edges))
    s[r, c] = vals
    s[c, r] = vals
    np.fill_diagonal(s, 1.0)
    s = _untie(rng, s)
    tree_min = float(np.abs(s[r, c]).min())
    mask = np.triu(np.ones((d, d), dtype=bool), k=1)
    mask[r, c] = False
    off_max = float(np.abs(s[mask]).max()) if mask.any() else 0.0
    lam = 0.5 * (off_max + tree_min) if lam_rule == "midpoint" else 0.85 - TREE_LAM_MARGIN
    return CovarianceInstance(s, lam, (off_max, tree_min), sorted(edges), seed, "tree")


def cycle_covariance(d, seed=None, lam=0.75):
    """Unit-diagonal matrix with ``+-0.8`` on a random ``d``-cycle, others in ``[-0.7, 0.7]``.

    At ``lam = 0.75`` the residue is the cycle with entries ``+-0.05`` and
    ``I + residue`` is diagonally dominant.
    """
    if d < 3:
        raise ValueError("d must be at least 3")
    rng = rng_for(seed)
    s = rng.uniform(-0.7, 0.7, size=(d, d))
    s = np.triu(s, k=1)
    s = s + s.T
    order = rng.permutation(d)
    edges = sorted((min(int(order[i]), int(order[(i + 1) % d])),
                    max(int(order[i]), int(order[(i + 1) % d]))) for i in range(d))
    r = np.array([e[0] for e in edges])
    c = np.array([e[1] for e in edges])
    vals = 0.8 * rng.choice([-1.0, 1.0], size=d)
    s[r, c] = vals
    s[c, r] = vals
    np.fill_diagonal(s, 1.0)
    shrunk = np.abs(vals) - lam
    if not 2 * shrunk.max() < 1:
        raise AssertionError("cycle residue is not diagonally dominant")
    off = np.abs(s[np.triu(np.ones((d, d), dtype=bool), k=1)])
    below = off[off < 0.8]
    return CovarianceInstance(s, lam, (float(below.max()) if below.size else 0.0, 0.8),
                              edges, seed, "cycle")
