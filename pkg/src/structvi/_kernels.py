"""JIT-compiled O(T) recurrences shared by the banded linear algebra layer.

These are the hot loops; everything here takes contiguous float64 arrays
and performs no validation. Argument checking lives in the public wrappers.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def solve_upper_kernel(nu, omega, rhs):
    # Back substitution for the upper-bidiagonal system B y = rhs.
    T = nu.shape[0]
    y = np.empty(T)
    y[T - 1] = rhs[T - 1] / nu[T - 1]
    for t in range(T - 2, -1, -1):
        y[t] = (rhs[t] - omega[t] * y[t + 1]) / nu[t]
    return y


@njit(cache=True)
def solve_lower_transpose_kernel(nu, omega, rhs):
    # Forward substitution for the lower-bidiagonal system B^T y = rhs.
    T = nu.shape[0]
    y = np.empty(T)
    y[0] = rhs[0] / nu[0]
    for t in range(1, T):
        y[t] = (rhs[t] - omega[t - 1] * y[t - 1]) / nu[t]
    return y


@njit(cache=True)
def tridiag_solve_kernel(diag, offdiag, rhs):
    """Thomas elimination for a symmetric tridiagonal system.

    Returns (y, bad) where bad is the row of the first non-positive pivot,
    or -1 if elimination succeeded. Pivots of a positive definite matrix
    are always positive, so bad >= 0 signals a non-PD input.
    """
    T = diag.shape[0]
    y = np.empty(T)
    c = np.empty(T)  # scaled superdiagonal after elimination
    if diag[0] <= 0.0:
        return y, 0
    c[0] = offdiag[0] / diag[0] if T > 1 else 0.0
    y[0] = rhs[0] / diag[0]
    for t in range(1, T):
        piv = diag[t] - offdiag[t - 1] * c[t - 1]
        if piv <= 0.0:
            return y, t
        if t < T - 1:
            c[t] = offdiag[t] / piv
        y[t] = (rhs[t] - offdiag[t - 1] * y[t - 1]) / piv
    for t in range(T - 2, -1, -1):
        y[t] -= c[t] * y[t + 1]
    return y, -1


@njit(cache=True)
def marginal_variance_kernel(nu, omega):
    # Backward recursion for diag((B^T B)^-1); see the variational family docs.
    T = nu.shape[0]
    var = np.empty(T)
    var[T - 1] = 1.0 / (nu[T - 1] * nu[T - 1])
    for t in range(T - 2, -1, -1):
        r = omega[t] / nu[t]
        var[t] = 1.0 / (nu[t] * nu[t]) + r * r * var[t + 1]
    return var


@njit(cache=True)
def covariance_band_kernel(nu, omega):
    # Diagonal and first superdiagonal of (B^T B)^-1 in one backward pass.
    T = nu.shape[0]
    var = np.empty(T)
    cov1 = np.empty(max(T - 1, 0))
    var[T - 1] = 1.0 / (nu[T - 1] * nu[T - 1])
    for t in range(T - 2, -1, -1):
        r = omega[t] / nu[t]
        cov1[t] = -r * var[t + 1]
        var[t] = 1.0 / (nu[t] * nu[t]) + r * r * var[t + 1]
    return var, cov1
