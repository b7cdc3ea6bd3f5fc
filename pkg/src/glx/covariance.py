"""Sample covariance, soft-thresholding residues and the lambda/k ladder."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateColumn, TieAtBoundary
from .numerics import SparseSymmetric, as_symmetric

K0_FACTOR = 1.01


def sample_covariance(x, ddof=0):
    """Covariance of the rows of ``x`` (observations x features).

    ``ddof=0`` gives the maximum-likelihood ``1/n`` normalization.

    Raises
    ------
    DegenerateColumn
        If some feature has zero sample variance.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise ValueError(f"samples must be a non-empty 2-D array, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples contain non-finite values")
    n = x.shape[0]
    if n - ddof < 1:
        raise ValueError(f"need more than {ddof} samples")
    xc = x - x.mean(axis=0)
    cov = xc.T @ xc / (n - ddof)
    cov = 0.5 * (cov + cov.T)
    zero = np.flatnonzero(np.diag(cov) <= 0)
    if zero.size:
        raise DegenerateColumn(zero.tolist())
    return cov


def check_covariance(sigma):
    """Validate a covariance input: finite, symmetric, strictly positive diagonal."""
    s = as_symmetric(sigma, name="covariance", atol=1e-10)
    if np.any(np.diag(s) <= 0):
        raise ValueError("covariance diagonal must be strictly positive")
    return s


@dataclass(frozen=True)
class ResidueMatrix:
    """Soft-thresholded covariance and its normalized form.

    ``residue`` has zero diagonal and keeps ``sigma_ij - lam*sign(sigma_ij)``
    exactly where ``|sigma_ij| > lam``. ``normalized`` divides each entry by
    ``sqrt(sigma_ii sigma_jj)``; ``scaling`` is ``diag(sigma)``.
    """

    lam: float
    residue: SparseSymmetric
    normalized: SparseSymmetric
    scaling: np.ndarray
    sigma: np.ndarray = field(repr=False)

    @property
    def dim(self):
        return self.residue.dim

    @property
    def n_edges(self):
        return self.residue.nnz_offdiag

    def normalized_max(self):
        """``max |normalized_ij|`` over the support (0 when empty)."""
        v = self.normalized.vals
        return float(np.max(np.abs(v))) if v.size else 0.0


def residue(sigma, lam):
    """Residue of ``sigma`` relative to ``lam``."""
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    s = np.asarray(sigma, dtype=float)
    d = s.shape[0]
    upper = np.triu(np.abs(s) > lam, k=1)
    r, c = np.nonzero(upper)
    v = s[r, c]
    shrunk = v - lam * np.sign(v)
    keep = shrunk != 0
    r, c, shrunk = r[keep], c[keep], shrunk[keep]
    dg = np.diag(s).copy()
    scale = np.sqrt(dg[r] * dg[c])
    zeros = np.zeros(d)
    return ResidueMatrix(
        lam=float(lam),
        residue=SparseSymmetric(d, r, c, shrunk, zeros),
        normalized=SparseSymmetric(d, r, c, shrunk / scale, zeros),
        scaling=dg,
        sigma=s,
    )


@dataclass(frozen=True)
class MagnitudeLadder:
    """Upper-triangular magnitudes ``|sigma_ij|`` sorted in decreasing order.

    ``values`` keeps every entry (length ``d(d-1)/2``), so ``values[k-1]``
    is sigma_k in the usual 1-based notation. ``ties`` maps each repeated
    magnitude to its multiplicity.
    """

    values: np.ndarray
    ties: dict

    @property
    def distinct(self):
        return np.unique(self.values)[::-1]

    @property
    def has_ties(self):
        return bool(self.ties)

    def __len__(self):
        return int(self.values.size)

    def sigma(self, k):
        """1-based accessor: ``sigma(1)`` is the largest magnitude."""
        return float(self.values[k - 1])


def magnitude_ladder(sigma):
    s = np.asarray(sigma, dtype=float)
    r, c = np.triu_indices(s.shape[0], k=1)
    mags = np.sort(np.abs(s[r, c]))[::-1]
    uniq, counts = np.unique(mags, return_counts=True)
    ties = {float(u): int(n) for u, n in zip(uniq, counts) if n > 1}
    return MagnitudeLadder(values=mags, ties=ties)


def lambda_for_k(ladder, k):
    """Regularization value whose residue keeps exactly the ``k`` largest magnitudes.

    Returns the midpoint ``(sigma_k + sigma_{k+1}) / 2``; for ``k = 0``
    returns ``1.01 * sigma_1``.
    """
    n = len(ladder)
    if not 0 <= k <= n - 1:
        raise ValueError(f"k must lie in [0, {n - 1}]")
    if k == 0:
        top = ladder.sigma(1)
        return K0_FACTOR * top if top > 0 else 1e-12
    hi, lo = ladder.sigma(k), ladder.sigma(k + 1)
    if hi == lo:
        raise TieAtBoundary(f"sigma_{k} == sigma_{k + 1} == {hi!r}")
    return 0.5 * (hi + lo)


def hard_threshold_topk(sigma, k):
    """Keep the diagonal and the ``k`` largest-magnitude off-diagonal pairs."""
    s = np.asarray(sigma, dtype=float)
    d = s.shape[0]
    total = d * (d - 1) // 2
    if not 0 <= k <= total:
        raise ValueError(f"k must lie in [0, {total}]")
    r, c = np.triu_indices(d, k=1)
    mags = np.abs(s[r, c])
    order = np.argsort(-mags, kind="stable")
    if 0 < k < total and mags[order[k - 1]] == mags[order[k]]:
        raise TieAtBoundary(f"k-th and (k+1)-th magnitudes are both {mags[order[k]]!r}")
    chosen = order[:k]
    chosen = chosen[s[r[chosen], c[chosen]] != 0]
    return SparseSymmetric(d, r[chosen], c[chosen], s[r[chosen], c[chosen]], np.diag(s).copy())
