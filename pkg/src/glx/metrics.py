"""Accuracy and optimality measures for precision-matrix estimates."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import mpmath
import numpy as np

from .exceptions import NotPositiveDefinite, UndefinedRate, ZeroMatrix
from .numerics import to_dense
from .solver import gl_objective


def _offdiag_nonzero(m, zero_tol):
    nz = np.abs(to_dense(m)) > zero_tol
    np.fill_diagonal(nz, False)
    return nz


def tpr_fpr(est, truth, zero_tol=0.0):
    """True and false positive rates of the off-diagonal support of ``est``.

    An entry counts as nonzero when its magnitude exceeds ``zero_tol``.

    Raises
    ------
    UndefinedRate
        If ``truth`` has no off-diagonal nonzeros or no off-diagonal zeros.
    """
    e = _offdiag_nonzero(est, zero_tol)
    t = _offdiag_nonzero(truth, 0.0)
    if e.shape != t.shape:
        raise ValueError("dimension mismatch")
    off = ~np.eye(t.shape[0], dtype=bool)
    pos = int(t.sum())
    neg = int((~t & off).sum())
    if pos == 0:
        raise UndefinedRate("truth has no off-diagonal nonzeros")
    if neg == 0:
        raise UndefinedRate("truth has no off-diagonal zeros")
    return float((e & t).sum()) / pos, float((e & ~t & off).sum()) / neg


def support_mismatches(est, truth, zero_tol=0.0):
    """Number of unordered off-diagonal pairs where the supports disagree."""
    diff = _offdiag_nonzero(est, zero_tol) ^ _offdiag_nonzero(truth, 0.0)
    return int(np.triu(diff, k=1).sum())


def rel_frobenius(est, truth):
    """``||est - truth||_F / ||truth||_F``."""
    e, t = to_dense(est), to_dense(truth)
    den = np.linalg.norm(t)
    if den == 0:
        raise ZeroMatrix("reference matrix is zero")
    return float(np.linalg.norm(e - t) / den)


def similarity_degree(s_opt, a):
    """Cosine similarity of ``s_opt - I`` and ``a - I`` (Frobenius inner product)."""
    s = to_dense(s_opt) - np.eye(to_dense(s_opt).shape[0])
    b = to_dense(a) - np.eye(s.shape[0])
    ns, nb = np.linalg.norm(s), np.linalg.norm(b)
    if ns == 0 or nb == 0:
        raise ZeroMatrix("an argument equals the identity")
    return float(np.clip(np.sum(s * b) / (ns * nb), -1.0, 1.0))


@dataclass
class GapResult:
    absolute: float
    relative: float


def optimality_gap(a, sigma, lam, oracle):
    """Objective gap ``f(a) - f(oracle)`` and its relative form ``/|f(oracle)|``.

    ``oracle`` is a solver result (anything with ``to_dense``) or a matrix.
    """
    ref = oracle.to_dense() if hasattr(oracle, "to_dense") else to_dense(oracle)
    fa = gl_objective(a, sigma, lam)
    fo = gl_objective(ref, sigma, lam)
    gap = fa - fo
    rel = gap / abs(fo) if fo != 0 else math.inf
    return GapResult(gap, rel)


@dataclass
class AccuracyReport:
    tpr: Optional[float]
    fpr: Optional[float]
    rel_frobenius: float
    similarity: Optional[float]
    support_mismatches: int
    optimality_gap: Optional[float] = None

    def to_dict(self):
        return dict(self.__dict__)


def accuracy_report(est, truth, zero_tol=0.0, gap=None):
    """Collect the standard accuracy figures; undefined rates are reported as ``None``."""
    try:
        tpr, fpr = tpr_fpr(est, truth, zero_tol)
    except UndefinedRate:
        tpr = fpr = None
    try:
        sim = similarity_degree(truth, est)
    except ZeroMatrix:
        sim = None
    return AccuracyReport(tpr, fpr, rel_frobenius(est, truth), sim,
                          support_mismatches(est, truth, zero_tol), gap)


# ---------------------------------------------------------------------------
# extended precision

def _mp_objective(s, sigma, lam):
    d = s.rows
    try:
        chol = mpmath.cholesky(s)
    except ValueError as exc:
        raise NotPositiveDefinite(-1) from exc
    ld = 2 * mpmath.fsum(mpmath.log(chol[i, i]) for i in range(d))
    tr = mpmath.fsum(sigma[i, j] * s[j, i] for i in range(d) for j in range(d))
    off = mpmath.fsum(abs(s[i, j]) for i in range(d) for j in range(d) if i != j)
    return -ld + tr + lam * off


@dataclass
class PreciseOptimum:
    """Extended-precision GL optimum on a fixed support."""

    objective: mpmath.mpf
    precision: mpmath.matrix
    kkt_violation: float
    newton_steps: int


def polish_on_support(sigma, lam, start, dps=80, max_steps=60):
    """Minimize the GL objective over matrices sharing ``start``'s support and signs.

    Newton's method in ``dps``-digit arithmetic on the smooth restricted
    problem. The returned ``kkt_violation`` is the full (unrestricted)
    optimality residual, so a value near ``10**-dps`` certifies the point
    as the global optimum and not only the restricted one.
    """
    sig = np.asarray(sigma, dtype=float)
    s0 = to_dense(start)
    d = sig.shape[0]
    with mpmath.workdps(dps):
        lam_mp = mpmath.mpf(float(lam))
        sg = mpmath.matrix(sig.tolist())
        r, c = np.nonzero(np.triu(s0 != 0, k=1))
        signs = np.sign(s0[r, c])
        params = [[(i, i)] for i in range(d)] + [[(i, j), (j, i)] for i, j in zip(r, c)]
        s = mpmath.matrix(s0.tolist())

        def grad_hess(s):
            w = s ** -1
            n = len(params)
            g = mpmath.matrix(n, 1)
            h = mpmath.matrix(n, n)
            for p, ent in enumerate(params):
                sgn = 0 if p < d else signs[p - d]
                g[p] = mpmath.fsum(-w[b, a] + sg[a, b] + (lam_mp * sgn if a != b else 0) for a, b in ent)
                for q in range(p, n):
                    v = mpmath.fsum(w[dd, a] * w[b, cc] for a, b in ent for cc, dd in params[q])
                    h[p, q] = h[q, p] = v
            return g, h, w

        steps = 0
        tol = mpmath.mpf(10) ** (-(dps - 10))
        for steps in range(1, max_steps + 1):
            g, h, _ = grad_hess(s)
            dx = mpmath.lu_solve(h, g)
            t = mpmath.mpf(1)
            while True:
                trial = s.copy()
                for p, ent in enumerate(params):
                    for a, b in ent:
                        trial[a, b] -= t * dx[p]
                try:
                    mpmath.cholesky(trial)
                    break
                except ValueError:
                    t /= 2
            s = trial
            if mpmath.norm(g, mpmath.inf) < tol:
                break
        w = s ** -1
        viol = mpmath.mpf(0)
        for i in range(d):
            viol = max(viol, abs(w[i, i] - sg[i, i]))
            for j in range(i + 1, d):
                if s[i, j] != 0:
                    viol = max(viol, abs(w[i, j] - sg[i, j] - lam_mp * mpmath.sign(s[i, j])))
                    if mpmath.sign(s[i, j]) != np.sign(s0[i, j]):
                        viol = max(viol, mpmath.mpf(1))
                else:
                    viol = max(viol, abs(w[i, j] - sg[i, j]) - lam_mp)
        return PreciseOptimum(_mp_objective(s, sg, lam_mp), s, float(viol), steps)


def precise_relative_gap(a, sigma, lam, dps=80):
    """Relative gap ``(f(a) - f*)/|f*|`` evaluated in extended precision.

    ``f*`` comes from :func:`polish_on_support` started at ``a``. Useful
    when the gap is far below double-precision resolution. Returns
    ``(gap, optimum)``.
    """
    opt = polish_on_support(sigma, lam, a, dps=dps)
    with mpmath.workdps(dps):
        fa = _mp_objective(mpmath.matrix(to_dense(a).tolist()),
                           mpmath.matrix(np.asarray(sigma, dtype=float).tolist()),
                           mpmath.mpf(float(lam)))
        gap = (fa - opt.objective) / abs(opt.objective)
        return float(gap), opt
