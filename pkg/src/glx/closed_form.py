"""Closed-form graphical-lasso estimates and their certificates.

The exact formula applies on acyclic residue supports that pass the
three verifiable checks (acyclicity, positive definiteness of
``I + normalized residue``, and the gap inequality); the same formula
serves as an approximation elsewhere, with an epsilon certificate whose
size decays with the girth of the support.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import CertificateUnavailable, ConditionsFailed, DegenerateEntry, NotAcyclic
from .graph import OVERFLOW, PATH_CAP, SupportGraph, decompose, girth, max_degree, max_simple_paths
from .numerics import SparseSymmetric, eigen_brackets, extreme_eigenvalues, is_positive_definite

CLOSED_EXACT = "closed_exact"
CLOSED_APPROX = "closed_approx"
NUMERICAL = "numerical"
WARM_STARTED = "warm_started"


@dataclass
class ComponentRecord:
    index: int
    vertices: np.ndarray
    n_edges: int
    acyclic: bool
    pd_check: bool
    gap_lhs: float
    gap_rhs: float

    @property
    def gap_check(self):
        return self.gap_lhs <= self.gap_rhs

    @property
    def passed(self):
        return self.acyclic and self.pd_check and self.gap_check

    def to_dict(self):
        return {
            "index": self.index,
            "size": int(self.vertices.size),
            "n_edges": self.n_edges,
            "acyclic": self.acyclic,
            "pd_check": self.pd_check,
            "gap_check": self.gap_check,
            "gap_lhs": self.gap_lhs,
            "gap_rhs": _finite_or_none(self.gap_rhs),
        }


def _finite_or_none(x):
    return float(x) if x is not None and math.isfinite(x) else None


@dataclass
class ConditionReport:
    """Verdicts of the closed-form checks, per component and globally.

    Component records cover components with at least one edge; isolated
    vertices pass trivially and are only counted. ``gap_rhs`` of a
    component minimizes over its own non-adjacent pairs, which is all the
    off-support optimality clause needs because pairs in different
    components are decoupled. The global fields evaluate the inequalities
    as stated for the whole matrix.
    """

    lam: float
    components: list
    n_singletons: int
    global_pd: bool
    global_gap_lhs: float
    global_gap_rhs: float
    global_acyclic: bool
    sufficient_gap: Optional[dict] = None

    @property
    def global_gap_check(self):
        return self.global_gap_lhs <= self.global_gap_rhs

    @property
    def all_passed(self):
        return all(c.passed for c in self.components)

    @property
    def exact_conditions(self):
        """All three checks evaluated on the whole matrix."""
        return self.global_acyclic and self.global_pd and self.global_gap_check

    @property
    def approx_conditions(self):
        """The two checks required by the epsilon certificate."""
        return self.global_pd and self.global_gap_check

    def to_dict(self):
        return {
            "lambda": self.lam,
            "n_singletons": self.n_singletons,
            "global": {
                "acyclic": self.global_acyclic,
                "pd_check": self.global_pd,
                "gap_check": self.global_gap_check,
                "gap_lhs": self.global_gap_lhs,
                "gap_rhs": _finite_or_none(self.global_gap_rhs),
            },
            "sufficient_gap": self.sufficient_gap,
            "components": [c.to_dict() for c in self.components],
        }


@dataclass
class EpsilonCertificate:
    epsilon: float
    delta: float
    girth_used: float
    p_max_used: object
    deg_used: int
    alpha: float
    d_max: int
    mu_min_a: float
    mu_max_a: float
    perturbation_bound: float
    optgap_bound: float
    optgap_proxy: bool = True

    def to_dict(self):
        return {
            "epsilon": self.epsilon,
            "delta": self.delta,
            "girth": None if math.isinf(self.girth_used) else int(self.girth_used),
            "p_max": self.p_max_used if isinstance(self.p_max_used, int) else "overflow",
            "deg": self.deg_used,
            "alpha": self.alpha,
            "d_max": self.d_max,
            "mu_min_a": self.mu_min_a,
            "mu_max_a": self.mu_max_a,
            "perturbation_bound": self.perturbation_bound,
            "optgap_bound": self.optgap_bound,
            "optgap_proxy": self.optgap_proxy,
        }


@dataclass
class GlSolution:
    """An estimated precision matrix with its provenance.

    ``component_methods`` maps each component index (of the residue
    support decomposition) to the method that produced its block.
    """

    estimate: SparseSymmetric
    method: str
    lam: float
    report: Optional[ConditionReport] = None
    certificate: Optional[EpsilonCertificate] = None
    kkt_residual: Optional[float] = None
    component_methods: dict = field(default_factory=dict)
    iterations: int = 0

    def to_dense(self):
        return self.estimate.to_dense()


def _component_edges(res, dec):
    """Group residue edges by component: ``{k: (rows, cols, normalized_vals)}``."""
    nr = res.normalized
    if nr.vals.size == 0:
        return {}
    lab = dec.labels[nr.rows]
    order = np.argsort(lab, kind="stable")
    lab = lab[order]
    splits = np.flatnonzero(np.diff(lab)) + 1
    groups = {}
    for idx in np.split(order, splits):
        k = int(dec.labels[nr.rows[idx[0]]])
        groups[k] = (nr.rows[idx], nr.cols[idx], nr.vals[idx])
    return groups


def _gap_rhs_block(sigma, lam, vertices, support_pairs):
    """``min (lam - |sigma_ij|) / sqrt(sigma_ii sigma_jj)`` over non-adjacent pairs of a block."""
    v = np.asarray(vertices)
    if v.size < 3:
        return math.inf
    blk = sigma[np.ix_(v, v)]
    dg = np.sqrt(np.diag(blk))
    val = (lam - np.abs(blk)) / np.outer(dg, dg)
    mask = np.triu(np.ones(blk.shape, dtype=bool), k=1)
    pos = np.full(sigma.shape[0], -1, dtype=np.int64)
    pos[v] = np.arange(v.size)
    r, c = pos[support_pairs[0]], pos[support_pairs[1]]
    mask[np.minimum(r, c), np.maximum(r, c)] = False
    return float(val[mask].min()) if mask.any() else math.inf


def _global_gap_rhs(sigma, lam, chunk=512):
    d = sigma.shape[0]
    if d < 2:
        return math.inf
    dg = np.sqrt(np.diag(sigma))
    best = math.inf
    for start in range(0, d, chunk):
        rows = slice(start, min(d, start + chunk))
        blk = np.abs(sigma[rows])
        val = (lam - blk) / np.outer(dg[rows], dg)
        val[blk > lam] = np.inf
        ii = np.arange(rows.start, rows.stop)
        tri = np.arange(d)[None, :] <= ii[:, None]
        val[tri] = np.inf
        best = min(best, float(val.min()))
    return best


def _sufficient_gap_stats(res):
    """Ladder statistic ``((2s1 - sk - sk1)/Smax)^2 / ((sk - sk1)/Smax)`` against ``2/r^2``."""
    sigma = res.sigma
    d = sigma.shape[0]
    if res.n_edges == 0 or d < 2:
        return None
    mags = np.abs(sigma[np.triu_indices(d, k=1)])
    above = mags[mags > res.lam]
    below = mags[mags <= res.lam]
    if below.size == 0:
        return None
    s1, sk, sk1 = float(above.max()), float(above.min()), float(below.max())
    dg = np.diag(sigma)
    smax = float(dg.max())
    r = smax / float(dg.min())
    lhs = ((2 * s1 - sk - sk1) / smax) ** 2 / ((sk - sk1) / smax)
    rhs = 2.0 / r**2
    return {"k": int(above.size), "sigma_1": s1, "sigma_k": sk, "sigma_k1": sk1,
            "lhs": lhs, "rhs": rhs, "holds": bool(lhs <= rhs)}


def check_conditions(res, decomposition=None):
    """Evaluate the closed-form checks on a residue."""
    g = SupportGraph.from_matrix(res.residue)
    dec = decomposition or decompose(g)
    groups = _component_edges(res, dec)
    records = []
    singletons = 0
    all_pd = True
    for k, verts in enumerate(dec.components):
        if dec.edge_counts[k] == 0:
            singletons += 1
            continue
        rows, cols, vals = groups[k]
        pos = np.full(res.dim, -1, dtype=np.int64)
        pos[verts] = np.arange(verts.size)
        lr, lc = pos[rows], pos[cols]
        block = SparseSymmetric(verts.size, np.minimum(lr, lc), np.maximum(lr, lc), vals,
                                np.ones(verts.size))
        pd = is_positive_definite(block)
        all_pd &= pd
        lhs = float(np.max(np.abs(vals))) ** 2
        rhs = _gap_rhs_block(res.sigma, res.lam, verts, (rows, cols))
        records.append(ComponentRecord(k, verts, int(dec.edge_counts[k]), bool(dec.acyclic[k]),
                                       bool(pd), lhs, rhs))
    return ConditionReport(
        lam=res.lam,
        components=records,
        n_singletons=singletons,
        global_pd=bool(all_pd),
        global_gap_lhs=res.normalized_max() ** 2,
        global_gap_rhs=_global_gap_rhs(res.sigma, res.lam),
        global_acyclic=all(dec.acyclic),
        sufficient_gap=_sufficient_gap_stats(res),
    )


def approx_solution(res):
    """Closed-form estimate on the residue support.

    ``A_ij = -r_ij / (s_ii s_jj - r_ij^2)`` on each residue edge and
    ``A_ii = (1 + sum_m r_im^2 / (s_ii s_mm - r_im^2)) / s_ii``.

    Raises
    ------
    DegenerateEntry
        If a normalized residue entry has magnitude >= 1.
    """
    r = res.residue
    nv = res.normalized.vals
    bad = np.flatnonzero(np.abs(nv) >= 1.0)
    if bad.size:
        k = bad[0]
        raise DegenerateEntry(r.rows[k], r.cols[k], nv[k])
    dg = res.scaling
    e = r.vals
    denom = dg[r.rows] * dg[r.cols] - e**2
    off = -e / denom
    contrib = e**2 / denom
    acc = np.bincount(r.rows, weights=contrib, minlength=r.dim) + np.bincount(
        r.cols, weights=contrib, minlength=r.dim
    )
    diag = (1.0 + acc) / dg
    return SparseSymmetric(r.dim, r.rows, r.cols, off, diag)


def _label_solution(res, report, estimate):
    methods = {}
    for rec in report.components:
        methods[rec.index] = CLOSED_EXACT if rec.passed else CLOSED_APPROX
    method = CLOSED_EXACT if report.all_passed else CLOSED_APPROX
    return GlSolution(estimate=estimate, method=method, lam=res.lam, report=report,
                      component_methods=methods)


def closed_form_solution(res, report=None):
    """Approximate closed form, labelled exact on components that pass every check."""
    report = report or check_conditions(res)
    return _label_solution(res, report, approx_solution(res))


def exact_solution(res, report=None):
    """Exact closed-form graphical-lasso solution.

    Raises
    ------
    ConditionsFailed
        When any component fails a check. ``partial`` carries the mixed
        solution when the formula is defined.
    """
    report = report or check_conditions(res)
    if not report.all_passed:
        try:
            partial = _label_solution(res, report, approx_solution(res))
        except DegenerateEntry:
            partial = None
        raise ConditionsFailed(report, partial)
    return _label_solution(res, report, approx_solution(res))


def _check_tree_input(m, g):
    a = np.asarray(m, dtype=float)
    if a.shape != (g.d, g.d):
        raise ValueError("matrix and graph dimensions differ")
    dec = decompose(g)
    if not all(dec.acyclic):
        raise NotAcyclic("support graph contains a cycle")
    return a, dec


def tree_complement(m, g):
    """Inverse-consistent complement of a unit-diagonal matrix with acyclic support.

    Each non-adjacent pair in a common component gets the product of the
    matrix entries along the unique tree path joining it.
    """
    a, dec = _check_tree_input(m, g)
    n = np.zeros_like(a)
    for comp in dec.components:
        if comp.size < 3:
            continue
        for root in comp:
            prod = {int(root): 1.0}
            depth = {int(root): 0}
            queue = deque([int(root)])
            while queue:
                u = queue.popleft()
                for w in g.adjacency[u]:
                    w = int(w)
                    if w not in prod:
                        prod[w] = prod[u] * a[u, w]
                        depth[w] = depth[u] + 1
                        queue.append(w)
            for v, p in prod.items():
                if depth[v] >= 2:
                    n[root, v] = p
    return n


def tree_inverse(m, g):
    """Inverse of ``m + tree_complement(m, g)`` in closed form.

    ``A_ii = 1 + sum_{k ~ i} m_ik^2 / (1 - m_ik^2)``,
    ``A_ij = -m_ij / (1 - m_ij^2)`` on edges, zero elsewhere.
    """
    a, _ = _check_tree_input(m, g)
    out = np.eye(g.d)
    for i, j in g.edge_list():
        v = a[i, j]
        if abs(v) >= 1.0:
            raise DegenerateEntry(i, j, v)
        w = v * v / (1.0 - v * v)
        out[i, i] += w
        out[j, j] += w
        out[i, j] = out[j, i] = -v / (1.0 - v * v)
    return out


def dt_positive_definite_check(s, sigma, lam):
    """Whether ``D + T(lam)`` is positive definite for a candidate solution ``s``.

    ``T`` carries ``sigma_ij + lam * sign(s_ij)`` on the off-diagonal
    support of ``s`` and zero elsewhere, including its diagonal.
    """
    sigma = np.asarray(sigma, dtype=float)
    vals = sigma[s.rows, s.cols] + lam * np.sign(s.vals)
    nz = vals != 0
    m = SparseSymmetric(s.dim, s.rows[nz], s.cols[nz], vals[nz], np.diag(sigma).copy())
    return is_positive_definite(m)


def _block_eigs(a, dec, tol):
    lo, hi = math.inf, -math.inf
    for comp in dec.components:
        if comp.size == 1:
            v = float(a.diag[comp[0]])
            lo, hi = min(lo, v), max(hi, v)
            continue
        blk = a.submatrix(comp)
        if comp.size <= 500:
            (l0, _), (_, h1) = eigen_brackets(blk.to_dense(), tol=tol)
        else:
            l0, h1 = extreme_eigenvalues(blk, tol=tol, method="lanczos")
        lo, hi = min(lo, l0), max(hi, h1)
    return lo, hi


def epsilon_certificate(res, a=None, report=None, cap=PATH_CAP, mu_max_opt=None, tol=1e-10):
    """Epsilon bound on the relaxed optimality conditions of the closed form.

    ``epsilon = max(Smax, sqrt(Smax/Smin)) * delta * (Pmax - 1) * alpha^ceil(c/2)``
    with ``delta = 1 + deg alpha^2/(1-alpha^2) + (deg-1)/(1-alpha^2)``,
    ``alpha`` the largest normalized residue magnitude, ``c`` the girth,
    ``deg`` the maximum degree and ``Pmax`` the largest simple-path count
    of the residue support. The perturbation bound is
    ``d_max (1/mu_min(A) + 1) epsilon`` and the optimality-gap bound
    multiplies it by ``mu_max(A) + mu_max(S_opt)``; without
    ``mu_max_opt`` the second term is replaced by ``1/Smin``.

    Raises
    ------
    CertificateUnavailable
        If the PD or gap check fails, the path count overflows ``cap``,
        or ``A`` is not positive definite.
    """
    report = report or check_conditions(res)
    if not report.approx_conditions:
        raise CertificateUnavailable("positive-definiteness or gap condition fails")
    if a is None:
        a = approx_solution(res)
    g = SupportGraph.from_matrix(res.residue)
    dec = decompose(g)
    dg = res.scaling
    smax, smin = float(dg.max()), float(dg.min())
    alpha = res.normalized_max()
    deg = max_degree(g)
    c = girth(g)
    if g.n_edges == 0:
        pmax, delta, eps = 0, 1.0, 0.0
    else:
        pmax = max_simple_paths(g, cap=cap)
        if pmax is OVERFLOW:
            raise CertificateUnavailable(f"simple-path count exceeds cap={cap}")
        one_minus = 1.0 - alpha**2
        delta = 1.0 + deg * alpha**2 / one_minus + (deg - 1) / one_minus
        if math.isinf(c):
            eps = 0.0
        else:
            eps = max(smax, math.sqrt(smax / smin)) * delta * (pmax - 1) * alpha ** math.ceil(c / 2)
    mu_min, mu_max = _block_eigs(a, dec, tol)
    if mu_min <= 0:
        raise CertificateUnavailable(f"closed form is not positive definite (mu_min={mu_min:.3g})")
    pert = dec.d_max * (1.0 / mu_min + 1.0) * eps
    proxy = mu_max_opt is None
    mu_opt = 1.0 / smin if proxy else float(mu_max_opt)
    return EpsilonCertificate(
        epsilon=float(eps), delta=float(delta), girth_used=c, p_max_used=pmax, deg_used=int(deg),
        alpha=alpha, d_max=int(dec.d_max), mu_min_a=float(mu_min), mu_max_a=float(mu_max),
        perturbation_bound=float(pert), optgap_bound=float((mu_max + mu_opt) * pert),
        optgap_proxy=proxy,
    )


def path_sum_certificate_matrix(res, cap=PATH_CAP):
    """Approximate inverse of the closed form built from simple-path sums.

    ``R_ij`` sums, over all simple paths joining ``i`` and ``j`` in the
    residue support, the product of normalized residue entries along the
    path (``R_ii = 1``); the returned matrix is ``D^1/2 R D^1/2``.
    """
    from .graph import simple_path_stats

    g = SupportGraph.from_matrix(res.residue)
    counts, sums = simple_path_stats(g, weights=res.normalized, cap=cap)
    if counts is OVERFLOW:
        raise CertificateUnavailable(f"simple-path count exceeds cap={cap}")
    root = np.sqrt(res.scaling)
    return sums * np.outer(root, root)


def empirical_lambda0(sigma, lambdas):
    """Smallest swept lambda from which every larger swept value gives a PD closed form.

    Returns ``None`` when the largest swept value already fails.
    """
    from .covariance import residue

    best = None
    for lam in sorted(lambdas, reverse=True):
        res = residue(sigma, lam)
        try:
            ok = is_positive_definite(approx_solution(res))
        except DegenerateEntry:
            ok = False
        if not ok:
            break
        best = float(lam)
    return best
