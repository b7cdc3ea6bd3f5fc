"""scikit-learn compatible estimator around the closed-form and numerical pipelines."""
from __future__ import annotations

import numpy as np
from sklearn.covariance import EmpiricalCovariance
from sklearn.utils.validation import validate_data

from .closed_form import closed_form_solution, epsilon_certificate, exact_solution
from .covariance import lambda_for_k, magnitude_ladder, residue, sample_covariance
from .exceptions import CertificateUnavailable, DegenerateEntry
from .numerics import inverse
from .solver import SolverConfig, glasso_solve, warm_start_solve

METHODS = ("closed", "approx", "glasso", "warm")


class ClosedFormGraphicalLasso(EmpiricalCovariance):
    """Sparse inverse covariance by soft-thresholding, with numerical fallback.

    Parameters
    ----------
    alpha : float, optional
        Regularization weight. Exactly one of ``alpha`` and ``k`` must be set.
    k : int, optional
        Pick ``alpha`` so that the ``k`` largest off-diagonal covariance
        magnitudes survive thresholding.
    method : {"closed", "approx", "glasso", "warm"}
        ``closed`` requires every closed-form check to pass and raises
        ``ConditionsFailed`` otherwise; ``approx`` applies the formula
        regardless; ``glasso`` runs the numerical solver on the whole
        matrix; ``warm`` mixes the two per connected component.
    tol, max_iter : float, int
        Numerical solver settings.
    covariance : {None, "precomputed"}
        With ``"precomputed"`` the input to :meth:`fit` is the covariance.
    certificate : bool
        Also compute the epsilon certificate (``closed``/``approx`` only).
    assume_centered : bool
        Skip centering the data.

    Attributes
    ----------
    covariance_, precision_ : ndarray
        Fitted covariance (inverse of the precision) and precision.
    alpha_ : float
    solution_ : GlSolution
    report_ : ConditionReport or None
    certificate_ : EpsilonCertificate or None
    """

    def __init__(self, alpha=None, k=None, method="warm", tol=1e-7, max_iter=10_000,
                 covariance=None, certificate=False, assume_centered=False):
        super().__init__(store_precision=True, assume_centered=assume_centered)
        self.alpha = alpha
        self.k = k
        self.method = method
        self.tol = tol
        self.max_iter = max_iter
        self.covariance = covariance
        self.certificate = certificate

    def fit(self, X, y=None):
        if (self.alpha is None) == (self.k is None):
            raise ValueError("set exactly one of alpha and k")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        X = validate_data(self, X, ensure_min_features=1, ensure_min_samples=1)
        if self.covariance == "precomputed":
            sigma = np.asarray(X, dtype=float)
            self.location_ = np.zeros(sigma.shape[0])
        else:
            self.location_ = np.zeros(X.shape[1]) if self.assume_centered else X.mean(axis=0)
            sigma = sample_covariance(X - self.location_)
        lam = float(self.alpha) if self.alpha is not None else float(
            lambda_for_k(magnitude_ladder(sigma), self.k))
        cfg = SolverConfig(tol=self.tol, max_iter=self.max_iter)
        self.certificate_ = None
        if self.method in ("closed", "approx"):
            res = residue(sigma, lam)
            sol = exact_solution(res) if self.method == "closed" else closed_form_solution(res)
            if self.certificate:
                try:
                    self.certificate_ = epsilon_certificate(res, sol.estimate, sol.report)
                except (CertificateUnavailable, DegenerateEntry):
                    pass
        elif self.method == "glasso":
            sol = glasso_solve(sigma, lam, cfg)
        else:
            sol = warm_start_solve(sigma, lam, cfg)
        self.alpha_ = lam
        self.solution_ = sol
        self.report_ = sol.report
        self.precision_ = sol.to_dense()
        self.covariance_ = inverse(self.precision_)
        return self
