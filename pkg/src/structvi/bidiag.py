"""Exact O(T) kernels for upper-bidiagonal and symmetric tridiagonal matrices.

Two fixed shapes cover everything this library needs: the upper-bidiagonal
Cholesky factor of a tridiagonal precision matrix, and the symmetric
tridiagonal precision itself. All solves run in O(T) and never materialize
an inverse; ``to_dense`` exists for test oracles only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import (
    solve_lower_transpose_kernel,
    solve_upper_kernel,
    tridiag_solve_kernel,
)
from .errors import NotPositiveDefiniteError

DENSE_GUARD = 4096


def _as_vector(x, name):
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {v.shape}")
    return np.ascontiguousarray(v)


@dataclass(frozen=True)
class BidiagUpper:
    """Upper-bidiagonal matrix: diagonal ``nu`` (length T, strictly positive)
    and superdiagonal ``omega`` (length T-1, unconstrained).
    """

    nu: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        nu = _as_vector(self.nu, "nu")
        omega = _as_vector(self.omega, "omega")
        if nu.size < 1:
            raise ValueError("nu must have length >= 1")
        if omega.size != nu.size - 1:
            raise ValueError(
                f"omega must have length T-1 = {nu.size - 1}, got {omega.size}"
            )
        if not np.all(np.isfinite(nu)) or not np.all(np.isfinite(omega)):
            raise ValueError("bidiagonal entries must be finite")
        if np.any(nu <= 0.0):
            raise ValueError("diagonal entries nu must be strictly positive")
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "omega", omega)

    @property
    def T(self) -> int:
        return self.nu.size


@dataclass(frozen=True)
class SymTridiag:
    """Symmetric tridiagonal matrix stored as its diagonal and one off-diagonal.

    Positive definiteness is not checked at construction; it surfaces as a
    factorization failure in ``tridiag_solve``.
    """

    diag: np.ndarray
    offdiag: np.ndarray

    def __post_init__(self):
        d = _as_vector(self.diag, "diag")
        e = _as_vector(self.offdiag, "offdiag")
        if d.size < 1:
            raise ValueError("diag must have length >= 1")
        if e.size != d.size - 1:
            raise ValueError(
                f"offdiag must have length T-1 = {d.size - 1}, got {e.size}"
            )
        if not np.all(np.isfinite(d)) or not np.all(np.isfinite(e)):
            raise ValueError("tridiagonal entries must be finite")
        object.__setattr__(self, "diag", d)
        object.__setattr__(self, "offdiag", e)

    @property
    def T(self) -> int:
        return self.diag.size


def _check_len(v, T, name):
    v = _as_vector(v, name)
    if v.size != T:
        raise ValueError(f"{name} must have length {T}, got {v.size}")
    return v


def solve_upper(B: BidiagUpper, rhs) -> np.ndarray:
    """Solve B y = rhs by back substitution (the backward pass)."""
    rhs = _check_len(rhs, B.T, "rhs")
    return solve_upper_kernel(B.nu, B.omega, rhs)


def solve_lower_transpose(B: BidiagUpper, rhs) -> np.ndarray:
    """Solve B^T y = rhs by forward substitution (the forward pass)."""
    rhs = _check_len(rhs, B.T, "rhs")
    return solve_lower_transpose_kernel(B.nu, B.omega, rhs)


def matvec_upper(B: BidiagUpper, v) -> np.ndarray:
    """Compute B v: out[t] = nu[t] v[t] + omega[t] v[t+1] (no omega in the last row)."""
    v = _check_len(v, B.T, "v")
    out = B.nu * v
    if B.T > 1:
        out[:-1] += B.omega * v[1:]
    return out


def log_det(B: BidiagUpper) -> float:
    """log det B = sum_t log nu[t]; the superdiagonal does not contribute."""
    return float(np.sum(np.log(B.nu)))


def to_dense(B: BidiagUpper) -> np.ndarray:
    """Materialize B as a dense array. Test-oracle helper, guarded by size."""
    if B.T > DENSE_GUARD:
        raise ValueError(f"refusing to materialize T={B.T} > {DENSE_GUARD}")
    M = np.diag(B.nu)
    if B.T > 1:
        M[np.arange(B.T - 1), np.arange(1, B.T)] = B.omega
    return M


def tridiag_to_dense(A: SymTridiag) -> np.ndarray:
    """Dense counterpart of a SymTridiag. Test-oracle helper."""
    if A.T > DENSE_GUARD:
        raise ValueError(f"refusing to materialize T={A.T} > {DENSE_GUARD}")
    M = np.diag(A.diag)
    if A.T > 1:
        idx = np.arange(A.T - 1)
        M[idx, idx + 1] = A.offdiag
        M[idx + 1, idx] = A.offdiag
    return M


def tridiag_matvec(A: SymTridiag, v) -> np.ndarray:
    """Compute A v for a symmetric tridiagonal A in O(T)."""
    v = _check_len(v, A.T, "v")
    out = A.diag * v
    if A.T > 1:
        out[:-1] += A.offdiag * v[1:]
        out[1:] += A.offdiag * v[:-1]
    return out


def tridiag_solve(A: SymTridiag, rhs) -> np.ndarray:
    """Solve A y = rhs by Thomas elimination, O(T).

    Raises NotPositiveDefiniteError when a non-positive pivot shows up, which
    for a symmetric matrix means A is not positive definite.
    """
    rhs = _check_len(rhs, A.T, "rhs")
    y, bad = tridiag_solve_kernel(A.diag, A.offdiag, rhs)
    if bad >= 0:
        raise NotPositiveDefiniteError(
            f"non-positive pivot at row {bad}: matrix is not positive definite"
        )
    return y
