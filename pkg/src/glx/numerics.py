"""Dense and sparse symmetric matrix primitives.

Dense matrices are plain ``numpy`` arrays checked for symmetry at the
boundary. :class:`SparseSymmetric` stores the strict upper triangle plus
the diagonal and is the carrier for residues and closed-form estimates.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import NonConvergence, NotPositiveDefinite

PIVOT_RTOL = 1e-12
DENSE_LIMIT = 4096


def as_symmetric(m, name="matrix", atol=1e-12):
    """Return ``m`` as a float square array, raising if it is not symmetric."""
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError(f"{name} must be a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.T)) > atol * scale:
        raise ValueError(f"{name} is not symmetric")
    return a


@dataclass(frozen=True)
class SparseSymmetric:
    """Symmetric matrix stored as its diagonal and strict upper triangle.

    ``rows[k] < cols[k]`` for every stored entry, keys are unique and
    every stored value is nonzero.
    """

    dim: int
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    diag: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64)
        cols = np.asarray(self.cols, dtype=np.int64)
        vals = np.asarray(self.vals, dtype=float)
        diag = np.asarray(self.diag, dtype=float)
        if self.dim < 1 or diag.shape != (self.dim,):
            raise ValueError("diag must have length dim >= 1")
        if not (rows.shape == cols.shape == vals.shape):
            raise ValueError("rows, cols and vals must have equal length")
        if rows.size:
            if np.any(rows >= cols) or rows.min() < 0 or cols.max() >= self.dim:
                raise ValueError("off-diagonal keys must satisfy 0 <= i < j < dim")
            if np.any(vals == 0):
                raise ValueError("stored off-diagonal values must be nonzero")
            order = np.lexsort((cols, rows))
            rows, cols, vals = rows[order], cols[order], vals[order]
            keys = rows * self.dim + cols
            if np.any(keys[1:] == keys[:-1]):
                raise ValueError("duplicate off-diagonal keys")
        for name, arr in (("rows", rows), ("cols", cols), ("vals", vals), ("diag", diag)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_dense(cls, m, tol=0.0):
        """Build from a dense symmetric array; entries with ``|x| <= tol`` are dropped."""
        a = np.asarray(m, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("expected a square matrix")
        r, c = np.triu_indices(a.shape[0], k=1)
        v = a[r, c]
        keep = np.abs(v) > tol
        return cls(a.shape[0], r[keep], c[keep], v[keep], np.diag(a).copy())

    @classmethod
    def from_entries(cls, dim, entries, diag):
        """Build from ``(i, j, value)`` triples (either triangle, zeros skipped)."""
        ent = [(min(i, j), max(i, j), v) for i, j, v in entries if i != j and v != 0]
        if not ent:
            return cls(dim, [], [], [], diag)
        r, c, v = zip(*ent)
        return cls(dim, r, c, v, diag)

    @classmethod
    def diagonal(cls, diag):
        diag = np.asarray(diag, dtype=float)
        return cls(diag.size, [], [], [], diag)

    @property
    def nnz_offdiag(self):
        """Number of stored upper-triangular nonzeros."""
        return int(self.vals.size)

    @property
    def edges(self):
        return np.column_stack([self.rows, self.cols])

    def to_dense(self):
        a = np.zeros((self.dim, self.dim))
        a[self.rows, self.cols] = self.vals
        a[self.cols, self.rows] = self.vals
        a[np.diag_indices(self.dim)] = self.diag
        return a

    def to_scipy(self, fmt="csc"):
        """Full (both triangles) scipy sparse matrix."""
        n = self.dim
        idx = np.arange(n)
        r = np.concatenate([self.rows, self.cols, idx])
        c = np.concatenate([self.cols, self.rows, idx])
        v = np.concatenate([self.vals, self.vals, self.diag])
        return sp.coo_matrix((v, (r, c)), shape=(n, n)).asformat(fmt)

    def submatrix(self, index):
        """Principal submatrix on the sorted vertex list ``index``."""
        index = np.asarray(index, dtype=np.int64)
        pos = np.full(self.dim, -1, dtype=np.int64)
        pos[index] = np.arange(index.size)
        keep = (pos[self.rows] >= 0) & (pos[self.cols] >= 0)
        r, c = pos[self.rows[keep]], pos[self.cols[keep]]
        lo, hi = np.minimum(r, c), np.maximum(r, c)
        return SparseSymmetric(index.size, lo, hi, self.vals[keep], self.diag[index])

    def allclose(self, other, atol=0.0):
        return self.dim == other.dim and np.allclose(self.to_dense(), other.to_dense(), rtol=0, atol=atol)


def to_dense(m):
    if isinstance(m, SparseSymmetric):
        return m.to_dense()
    if sp.issparse(m):
        return m.toarray()
    return np.asarray(m, dtype=float)


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower-triangular ``L`` with ``L @ L.T`` equal to the factored matrix."""

    lower: np.ndarray

    @property
    def dim(self):
        return self.lower.shape[0]


def cholesky(m):
    """Cholesky factor of a symmetric matrix.

    Raises
    ------
    NotPositiveDefinite
        If a pivot is not larger than ``1e-12 * max(diag(m))``. The
        exception records the zero-based index of the failing pivot.
    """
    a = as_symmetric(to_dense(m))
    c, info = scipy.linalg.lapack.dpotrf(a, lower=1, clean=1)
    if info > 0:
        raise NotPositiveDefinite(info - 1)
    if info < 0:
        raise ValueError(f"dpotrf argument error {info}")
    pivots = np.diag(c) ** 2
    floor = PIVOT_RTOL * max(float(np.max(np.diag(a))), 0.0)
    bad = np.flatnonzero(pivots <= floor)
    if bad.size:
        raise NotPositiveDefinite(bad[0])
    return CholeskyFactor(np.tril(c))


def log_det(f):
    return 2.0 * float(np.sum(np.log(np.diag(f.lower))))


def solve(f, b):
    b = np.asarray(b, dtype=float)
    if b.shape[0] != f.dim:
        raise ValueError("right-hand side length does not match factor")
    return scipy.linalg.cho_solve((f.lower, True), b)


def inverse(m):
    """Inverse of a positive-definite matrix, symmetrized.

    Diagonal input is inverted entrywise, which is exact up to one rounding.
    """
    a = to_dense(m)
    dg = np.diag(a)
    if np.count_nonzero(a) == np.count_nonzero(dg) == a.shape[0] and np.all(dg > 0):
        return np.diag(1.0 / dg)
    f = cholesky(a)
    inv = solve(f, np.eye(f.dim))
    return 0.5 * (inv + inv.T)


def is_positive_definite(m):
    """Cholesky-based PD test for dense or :class:`SparseSymmetric` input.

    Large sparse inputs are factored by a fill-reducing symmetric LU
    without row pivoting, whose pivots are those of the LDLt
    factorization, so the test costs roughly the fill rather than O(d^3).
    """
    if isinstance(m, SparseSymmetric) and m.dim > 256:
        return _sparse_pd(m)
    try:
        cholesky(to_dense(m))
    except NotPositiveDefinite:
        return False
    return True


def _sparse_pd(m):
    if np.any(m.diag <= 0):
        return False
    if m.nnz_offdiag == 0:
        return True
    a = m.to_scipy("csc")
    try:
        lu = spla.splu(
            a,
            permc_spec="MMD_AT_PLUS_A",
            diag_pivot_thresh=0.0,
            options={"SymmetricMode": True},
        )
    except RuntimeError:
        return False
    if not np.array_equal(lu.perm_r, lu.perm_c):
        return False
    floor = PIVOT_RTOL * float(np.max(m.diag))
    return bool(np.all(lu.U.diagonal() > floor))


def gershgorin(a):
    radius = np.sum(np.abs(a), axis=1) - np.abs(np.diag(a))
    return float(np.min(np.diag(a) - radius)), float(np.max(np.diag(a) + radius))


def _pd_shift(a, s):
    """True when ``a - s I`` is positive definite."""
    c, info = scipy.linalg.lapack.dpotrf(a - s * np.eye(a.shape[0]), lower=1, clean=0)
    return info == 0 and np.all(np.diag(c) > 0)


def eigen_brackets(m, tol=1e-10, max_iter=200):
    """Certified intervals around the extreme eigenvalues.

    Bisection on Cholesky shifts: ``a - s I`` factors iff ``s < mu_min``,
    and ``s I - a`` factors iff ``s > mu_max``. Returns
    ``((lo_min, hi_min), (lo_max, hi_max))``, each of width at most
    ``tol * (|mu_max| + 1)``.
    """
    a = as_symmetric(to_dense(m))
    g_lo, g_hi = gershgorin(a)
    pad = 1e-9 * (abs(g_lo) + abs(g_hi) + 1.0)
    lo_min, hi_min = g_lo - pad, g_hi + pad
    lo_max, hi_max = g_lo - pad, g_hi + pad
    neg = -a
    for it in range(max_iter):
        width_target = tol * (max(abs(lo_max), abs(hi_max)) + 1.0)
        done_min = hi_min - lo_min <= width_target
        done_max = hi_max - lo_max <= width_target
        if done_min and done_max:
            return (lo_min, hi_min), (lo_max, hi_max)
        if not done_min:
            mid = 0.5 * (lo_min + hi_min)
            if _pd_shift(a, mid):
                lo_min = mid
            else:
                hi_min = mid
        if not done_max:
            mid = 0.5 * (lo_max + hi_max)
            # mid I - a PD  <=>  -a - (-mid) I PD
            if _pd_shift(neg, -mid):
                hi_max = mid
            else:
                lo_max = mid
    raise NonConvergence(f"eigenvalue bisection did not reach tol={tol} in {max_iter} steps")


def extreme_eigenvalues(m, tol=1e-10, method="bisection", max_iter=200):
    """Smallest and largest eigenvalues of a symmetric matrix.

    ``method="bisection"`` (default) returns bracket midpoints from
    :func:`eigen_brackets`. ``method="lanczos"`` uses ARPACK on sparse
    input and LAPACK ``eigvalsh`` on small dense input.
    """
    if method == "bisection":
        (a0, a1), (b0, b1) = eigen_brackets(m, tol=tol, max_iter=max_iter)
        return 0.5 * (a0 + a1), 0.5 * (b0 + b1)
    if method != "lanczos":
        raise ValueError(f"unknown method {method!r}")
    if isinstance(m, SparseSymmetric) and m.dim > 64:
        a = m.to_scipy("csr")
        try:
            lo = spla.eigsh(a, k=1, which="SA", tol=tol, maxiter=max_iter * a.shape[0],
                            return_eigenvectors=False)[0]
            hi = spla.eigsh(a, k=1, which="LA", tol=tol, maxiter=max_iter * a.shape[0],
                            return_eigenvectors=False)[0]
        except spla.ArpackNoConvergence as exc:
            raise NonConvergence(str(exc)) from exc
        return float(lo), float(hi)
    w = scipy.linalg.eigvalsh(as_symmetric(to_dense(m)))
    return float(w[0]), float(w[-1])


def max_offdiag_abs(m):
    """``max_{i != j} |m_ij|`` (0 for 1x1 or diagonal input)."""
    if isinstance(m, SparseSymmetric):
        return float(np.max(np.abs(m.vals))) if m.vals.size else 0.0
    a = to_dense(m)
    off = np.abs(a - np.diag(np.diag(a)))
    return float(off.max()) if a.size else 0.0


def norm_1_off(m):
    """Sum of absolute off-diagonal entries over both triangles."""
    if isinstance(m, SparseSymmetric):
        return 2.0 * float(np.sum(np.abs(m.vals)))
    a = to_dense(m)
    return float(np.sum(np.abs(a)) - np.sum(np.abs(np.diag(a))))


def frobenius(m):
    return float(np.linalg.norm(to_dense(m), "fro"))
