"""Maximum-determinant completion and the inverse/sign-consistency checks.

Desk-scale tools (dense, ``d <= 500``) used to verify structural claims
about thresholded covariances rather than to estimate anything.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from .exceptions import NonConvergence, NoPdCompletion, NotPositiveDefinite
from .graph import SupportGraph, decompose, max_degree
from .numerics import as_symmetric, cholesky, inverse, to_dense

ZERO_TOL = 1e-8
MAX_DIM = 500


@dataclass
class CompletionResult:
    complement: np.ndarray
    iterations: int
    converged: bool
    residual: float


def _free_pairs(m):
    return np.nonzero(np.triu(m == 0, k=1))


@njit(cache=True)
def _sweep(y, pi, rows, cols):
    d = y.shape[0]
    for k in range(rows.size):
        i, j = rows[k], cols[k]
        yij = y[i, j]
        if yij == 0.0:
            continue
        yii, yjj = y[i, i], y[j, j]
        t = yij / (yii * yjj - yij * yij)
        pi[i, j] += t
        pi[j, i] += t
        # rank-2 Woodbury correction for X += t (e_i e_j^T + e_j e_i^T)
        a, b, c = yii, yij + 1.0 / t, yjj
        det = a * c - b * b
        k00, k01, k11 = c / det, -b / det, a / det
        ui = y[:, i].copy()
        uj = y[:, j].copy()
        for p in range(d):
            gp = k00 * ui[p] + k01 * uj[p]
            hp = k01 * ui[p] + k11 * uj[p]
            for q in range(d):
                y[p, q] -= gp * ui[q] + hp * uj[q]


def _ascent(m, pi, free, tol, max_iter):
    """Cyclic coordinate ascent on ``log det(m + pi)`` over the free entries.

    Each step sets one free pair to its exact one-dimensional maximizer,
    which zeroes that entry of the inverse, and updates the inverse by a
    rank-2 correction. The inverse is refreshed every sweep.
    """
    r, c = (np.ascontiguousarray(x, dtype=np.int64) for x in free)
    y = inverse(m + pi)
    residual = float(np.max(np.abs(y[r, c]))) if r.size else 0.0
    sweeps = 0
    while residual > tol and sweeps < max_iter:
        _sweep(y, pi, r, c)
        sweeps += 1
        y = inverse(m + pi)
        residual = float(np.max(np.abs(y[r, c])))
    return pi, sweeps, residual


def max_det_completion(m, tol=1e-10, max_iter=10_000, start=None):
    """Determinant-maximizing positive-definite completion of ``m``.

    The zero off-diagonal entries of ``m`` are free. The result's
    ``complement`` is supported on those entries and makes the inverse
    of ``m + complement`` vanish there.

    When ``m`` itself is not positive definite and no ``start`` is given,
    the off-diagonal part is scaled in from zero and the completion is
    tracked along the way, halving the step whenever the next iterate
    fails its Cholesky test.

    Raises
    ------
    NoPdCompletion
        If no positive-definite iterate can be reached.
    NonConvergence
        If the residual is still above ``tol`` after ``max_iter`` sweeps.
    """
    m = as_symmetric(m)
    d = m.shape[0]
    if d > MAX_DIM:
        raise ValueError(f"completion is a desk-scale tool (d <= {MAX_DIM})")
    free = _free_pairs(m)
    pi = np.zeros_like(m)
    if start is not None:
        pi = np.array(start, dtype=float)
        pi[m != 0] = 0.0
        np.fill_diagonal(pi, 0.0)
    try:
        cholesky(m + pi)
        total = 0
    except NotPositiveDefinite:
        if start is not None:
            raise NoPdCompletion("starting point is not positive definite")
        if free[0].size == 0:
            raise NoPdCompletion("no free entries and the matrix is not positive definite")
        pi, total = _continuation(m, free, tol, max_iter)
    pi, sweeps, residual = _ascent(m, pi, free, tol, max_iter)
    total += sweeps
    converged = residual <= tol
    if not converged:
        raise NonConvergence(f"completion residual {residual:.3g} > tol after {max_iter} sweeps",
                             best=CompletionResult(pi, total, False, residual), iterations=total)
    return CompletionResult(pi, total, True, residual)


def _continuation(m, free, tol, max_iter, min_step=1e-9):
    dg = np.diag(np.diag(m))
    off = m - dg
    pi = np.zeros_like(m)
    t, step, total = 0.0, 0.25, 0
    while t < 1.0:
        nxt = min(1.0, t + step)
        cand = dg + nxt * off
        try:
            cholesky(cand + pi)
        except NotPositiveDefinite:
            step *= 0.5
            if step < min_step:
                raise NoPdCompletion(f"no positive-definite completion reached (stalled at scale {t:.6g})")
            continue
        pi, sweeps, _ = _ascent(cand, pi, free, max(tol, 1e-6), min(max_iter, 500))
        total += sweeps
        t = nxt
        step = min(0.5, step * 1.5)
    return pi, total


def has_pd_completion(m, tol=1e-10, max_iter=10_000):
    """Whether the zero off-diagonal entries of ``m`` can be filled to make it PD."""
    m = as_symmetric(m)
    try:
        cholesky(m)
        return True
    except NotPositiveDefinite:
        pass
    try:
        max_det_completion(m, tol=tol, max_iter=max_iter)
    except (NoPdCompletion, NonConvergence):
        return False
    return True


def is_inverse_consistent(m, complement, zero_tol=ZERO_TOL):
    """Check the three defining clauses of an inverse-consistent complement."""
    m = as_symmetric(m)
    n = np.asarray(complement, dtype=float)
    on = m != 0
    np.fill_diagonal(on, True)
    if np.any(n[on] != 0):
        return False
    try:
        inv = inverse(m + n)
    except NotPositiveDefinite:
        return False
    off = ~on
    return bool(np.all(np.abs(inv[off]) <= zero_tol))


def is_sign_consistent(m, complement, zero_tol=ZERO_TOL):
    """Support entries of ``m`` and ``(m + complement)^-1`` are nonzero with opposite signs."""
    m = as_symmetric(m)
    inv = inverse(m + np.asarray(complement, dtype=float))
    r, c = np.nonzero(np.triu(m != 0, k=1))
    if r.size == 0:
        return True
    vals = inv[r, c]
    return bool(np.all(np.abs(vals) > zero_tol) and np.all(np.sign(vals) == -np.sign(m[r, c])))


@dataclass
class BetaEstimate:
    empirical: float
    exact: Optional[float]
    trials: int
    rejected: int


def beta_empirical(g, alpha, trials=100, seed=None, extremes=False, tol=1e-12):
    """Sampled lower bound on the worst complement magnitude for support ``g``.

    Draws unit-diagonal matrices on ``g`` with off-diagonal entries
    uniform in ``[-alpha, alpha]`` (``extremes=True`` uses ``+-alpha``),
    keeps those with a PD completion, and returns the largest
    ``max |complement|`` seen. On forests the exact value is also given:
    ``alpha**2`` if some vertex has two neighbors, else 0.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if g.d > 50:
        raise ValueError("beta_empirical supports graphs with at most 50 vertices")
    rng = np.random.default_rng(seed)
    edges = np.array(g.edge_list(), dtype=np.int64).reshape(-1, 2)
    exact = None
    if all(decompose(g).acyclic):
        exact = alpha**2 if max_degree(g) >= 2 else 0.0
    best, used, rejected = 0.0, 0, 0
    for _ in range(trials):
        if extremes:
            vals = alpha * rng.choice([-1.0, 1.0], size=len(edges))
        else:
            vals = rng.uniform(-alpha, alpha, size=len(edges))
            vals[vals == 0] = alpha
        m = np.eye(g.d)
        if len(edges):
            m[edges[:, 0], edges[:, 1]] = vals
            m[edges[:, 1], edges[:, 0]] = vals
        try:
            comp = max_det_completion(m, tol=tol)
        except (NoPdCompletion, NonConvergence):
            rejected += 1
            continue
        used += 1
        best = max(best, float(np.max(np.abs(comp.complement))))
    return BetaEstimate(best, exact, used, rejected)


def equivalence_conditions(res, tol=1e-10):
    """Verify the completion-based sufficient conditions for support equivalence.

    Builds ``M = I + normalized residue`` and checks that it has a PD
    completion, that it is sign-consistent with its complement, and that
    the largest complement magnitude does not exceed the smallest
    normalized gap ``(lam - |sigma_ij|)/sqrt(sigma_ii sigma_jj)`` over
    pairs outside the residue support. The instance's own complement is
    used in place of the worst case over its support graph.
    """
    from .closed_form import _global_gap_rhs

    m = res.normalized.to_dense() + np.eye(res.dim)
    out = {"pd_completion": False, "sign_consistent": False, "gap": False,
           "complement_max": math.nan, "gap_rhs": _global_gap_rhs(res.sigma, res.lam), "all": False}
    try:
        comp = max_det_completion(m, tol=tol)
    except (NoPdCompletion, NonConvergence):
        return out
    out["pd_completion"] = True
    out["sign_consistent"] = is_sign_consistent(m, comp.complement)
    cmax = float(np.max(np.abs(comp.complement)))
    out["complement_max"] = cmax
    out["gap"] = cmax <= out["gap_rhs"]
    out["all"] = out["pd_completion"] and out["sign_consistent"] and out["gap"]
    return out
