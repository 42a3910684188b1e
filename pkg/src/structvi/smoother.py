"""Exact posterior for the linear-Gaussian random-walk model.

For Gaussian transitions and Gaussian observations the posterior is
Gaussian with tridiagonal precision Lambda = Lambda0 + tau * I and mean
solving Lambda mu = tau x, so everything here is a handful of O(T)
tridiagonal operations. This module is the ground truth that fitted
variational posteriors are judged against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import family
from .bidiag import BidiagUpper, SymTridiag, tridiag_matvec, tridiag_solve
from .errors import NotPositiveDefiniteError
from .family import StructuredGaussian

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class WienerPosterior:
    mean: np.ndarray
    precision: SymTridiag

    @property
    def T(self) -> int:
        return self.precision.T


def prior_precision(sigma0: float, sigma: float, T: int) -> SymTridiag:
    """Precision of the random-walk prior (negative Hessian of its log-density).

    diag[0] = 1/sigma0^2 + 1/sigma^2 (just 1/sigma0^2 at T = 1),
    diag[t] = 2/sigma^2 in the interior, diag[T-1] = 1/sigma^2,
    offdiag = -1/sigma^2.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    if sigma0 <= 0 or sigma <= 0:
        raise ValueError("sigma0 and sigma must be positive")
    a = 1.0 / sigma ** 2
    diag = np.full(T, 2.0 * a)
    diag[0] = 1.0 / sigma0 ** 2 + (a if T > 1 else 0.0)
    if T > 1:
        diag[T - 1] = a
    offdiag = np.full(max(T - 1, 0), -a)
    return SymTridiag(diag, offdiag)


def exact_posterior(sigma0: float, sigma: float, tau: float, x) -> WienerPosterior:
    """Posterior N(mu, Lambda^-1) with Lambda = Lambda0 + tau I, mu = tau Lambda^-1 x."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < 1:
        raise ValueError("x must be a non-empty vector")
    lam0 = prior_precision(sigma0, sigma, x.size)
    lam = SymTridiag(lam0.diag + tau, lam0.offdiag)
    mean = tridiag_solve(lam, tau * x)
    return WienerPosterior(mean=mean, precision=lam)


def tridiag_cholesky(A: SymTridiag) -> BidiagUpper:
    """Factor a positive definite SymTridiag as B^T B with B upper bidiagonal.

    Three-line recurrence: nu[t] = sqrt(diag[t] - omega[t-1]^2),
    omega[t] = offdiag[t] / nu[t].
    """
    T = A.T
    nu = np.empty(T)
    omega = np.empty(max(T - 1, 0))
    carry = 0.0
    for t in range(T):
        d = A.diag[t] - carry
        if d <= 0.0:
            raise NotPositiveDefiniteError(
                f"non-positive pivot at row {t}: matrix is not positive definite"
            )
        nu[t] = math.sqrt(d)
        if t < T - 1:
            omega[t] = A.offdiag[t] / nu[t]
            carry = omega[t] ** 2
    return BidiagUpper(nu, omega)


def posterior_marginal_variances(p: WienerPosterior) -> np.ndarray:
    """diag(Lambda^-1) in O(T) via the Cholesky factor of the precision."""
    factor = tridiag_cholesky(p.precision)
    return family.marginal_variances(
        StructuredGaussian(np.zeros(p.T), factor)
    )


def as_structured_gaussian(p: WienerPosterior) -> StructuredGaussian:
    """Express the exact posterior as a member of the variational family."""
    return StructuredGaussian(p.mean, tridiag_cholesky(p.precision))


def _log_det_tridiag(A: SymTridiag) -> float:
    return 2.0 * float(np.sum(np.log(tridiag_cholesky(A).nu)))


def log_evidence(sigma0: float, sigma: float, tau: float, x) -> float:
    """Exact log p(x) for the linear-Gaussian model.

    The marginal covariance of x is Lambda0^-1 + tau^-1 I; its determinant
    and quadratic form reduce to tridiagonal operations through
    det(Lambda0^-1 + tau^-1 I) = det(Lambda0 + tau I) / (tau^T det Lambda0)
    and (Lambda0^-1 + tau^-1 I)^-1 = tau (Lambda0 + tau I)^-1 Lambda0.
    """
    x = np.asarray(x, dtype=np.float64)
    T = x.size
    lam0 = prior_precision(sigma0, sigma, T)
    lam = SymTridiag(lam0.diag + tau, lam0.offdiag)
    log_det_cov = _log_det_tridiag(lam) - _log_det_tridiag(lam0) - T * math.log(tau)
    quad = tau * float(x @ tridiag_solve(lam, tridiag_matvec(lam0, x)))
    return -0.5 * (T * LOG_2PI + log_det_cov + quad)


def kl_from_posterior(q: StructuredGaussian, p: WienerPosterior) -> float:
    """KL(q || p) between the variational Gaussian and the exact posterior, O(T).

    Only the tridiagonal band of q's covariance enters the trace term
    because p's precision is tridiagonal.
    """
    if q.T != p.T:
        raise ValueError(f"dimension mismatch: q has T={q.T}, posterior T={p.T}")
    var, cov1 = family.covariance_band(q)
    trace = float(p.precision.diag @ var)
    if p.T > 1:
        trace += 2.0 * float(p.precision.offdiag @ cov1)
    delta = p.mean - q.mu
    quad = float(delta @ tridiag_matvec(p.precision, delta))
    log_det_q = 2.0 * float(np.sum(np.log(q.nu)))
    log_det_p = _log_det_tridiag(p.precision)
    return 0.5 * (trace + quad - p.T + log_det_q - log_det_p)
