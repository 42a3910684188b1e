"""The structured Gaussian variational family q(z) = N(mu, (B^T B)^-1).

The precision matrix is tridiagonal and parameterized through its
upper-bidiagonal Cholesky factor B, so sampling, entropy, density and
marginal variances all cost O(T). The covariance itself is dense, which is
the point: the family carries correlations between arbitrary time steps.

RNG policy: sampling is counter-based and splittable. Sample ``s`` of a
batch keyed by ``seed`` uses the substream (seed, s), so results are
bitwise reproducible regardless of evaluation order or parallelism.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import bidiag
from ._kernels import covariance_band_kernel, marginal_variance_kernel
from .bidiag import BidiagUpper

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class StructuredGaussian:
    """Variational parameters lambda = (mu, nu, omega)."""

    mu: np.ndarray
    factor: BidiagUpper

    def __post_init__(self):
        mu = np.ascontiguousarray(np.asarray(self.mu, dtype=np.float64))
        if mu.ndim != 1:
            raise ValueError(f"mu must be one-dimensional, got shape {mu.shape}")
        if mu.size != self.factor.T:
            raise ValueError(
                f"mu has length {mu.size} but the factor has T = {self.factor.T}"
            )
        if not np.all(np.isfinite(mu)):
            raise ValueError("mu must be finite")
        object.__setattr__(self, "mu", mu)

    @property
    def T(self) -> int:
        return self.factor.T

    @property
    def nu(self) -> np.ndarray:
        return self.factor.nu

    @property
    def omega(self) -> np.ndarray:
        return self.factor.omega


@dataclass(frozen=True)
class NoiseDraw:
    """One standard-normal noise vector plus the id of the substream it came from."""

    eps: np.ndarray
    stream_id: int


def structured_gaussian(mu, nu, omega) -> StructuredGaussian:
    return StructuredGaussian(np.asarray(mu, dtype=np.float64),
                              BidiagUpper(nu, omega))


def mean_field(mu, nu) -> StructuredGaussian:
    """Diagonal member of the family: omega = 0, independent per-step Gaussians."""
    mu = np.asarray(mu, dtype=np.float64)
    nu = np.asarray(nu, dtype=np.float64)
    if mu.ndim != 1 or mu.shape != nu.shape:
        raise ValueError("mu and nu must be one-dimensional with equal length")
    return StructuredGaussian(mu, BidiagUpper(nu, np.zeros(max(mu.size - 1, 0))))


def reparameterize(q: StructuredGaussian, eps: NoiseDraw) -> np.ndarray:
    """Map noise to a sample: z = mu + y with B y = eps, solved in O(T)."""
    return q.mu + bidiag.solve_upper(q.factor, eps.eps)


def entropy(q: StructuredGaussian) -> float:
    """Exact Gaussian entropy (T/2) log(2 pi e) - sum_t log nu[t].

    The additive constant is included so reported ELBO values are comparable
    across T and against analytic log evidence.
    """
    return 0.5 * q.T * (LOG_2PI + 1.0) - bidiag.log_det(q.factor)


def log_density(q: StructuredGaussian, z) -> float:
    """log q(z) = -(T/2) log(2 pi) + sum_t log nu[t] - ||B (z - mu)||^2 / 2."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (q.T,):
        raise ValueError(f"z must have shape ({q.T},), got {z.shape}")
    w = bidiag.matvec_upper(q.factor, z - q.mu)
    return -0.5 * q.T * LOG_2PI + bidiag.log_det(q.factor) - 0.5 * float(w @ w)


def marginal_variances(q: StructuredGaussian) -> np.ndarray:
    """diag((B^T B)^-1) by the backward recursion
    var[T-1] = 1/nu[T-1]^2,  var[t] = 1/nu[t]^2 + (omega[t]/nu[t])^2 var[t+1].
    """
    return marginal_variance_kernel(q.factor.nu, q.factor.omega)


def covariance_band(q: StructuredGaussian) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal and first superdiagonal of the covariance (B^T B)^-1, O(T).

    The superdiagonal follows from back substitution: cov[t, t+1] =
    -(omega[t]/nu[t]) var[t+1]. Enough to trace the covariance against any
    tridiagonal matrix, which is what the analytic KL computation needs.
    """
    var, cov1 = covariance_band_kernel(q.factor.nu, q.factor.omega)
    return var, cov1


def _substream(seed: int, stream_id: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, stream_id)))


def noise_draw(T: int, seed: int, stream_id: int) -> NoiseDraw:
    """Standard-normal draw from substream (seed, stream_id)."""
    eps = _substream(seed, stream_id).standard_normal(T)
    return NoiseDraw(eps=eps, stream_id=stream_id)


def sample_batch(q: StructuredGaussian, seed: int, S: int):
    """Draw S reparameterized samples, retaining the noise of each.

    Returns a list of (NoiseDraw, z) pairs. The draws are deterministic in
    (seed, S, T) and independent of evaluation order; the noise is retained
    because the gradient estimator needs the exact eps behind each z.
    """
    if S < 1:
        raise ValueError(f"S must be >= 1, got {S}")
    if seed < 0:
        raise ValueError("seed must be a non-negative integer")
    batch = []
    for s in range(S):
        draw = noise_draw(q.T, seed, s)
        batch.append((draw, reparameterize(q, draw)))
    return batch


def to_record(q: StructuredGaussian) -> dict:
    """Flat JSON-ready record {T, mu, nu, omega}."""
    return {
        "T": q.T,
        "mu": q.mu.tolist(),
        "nu": q.nu.tolist(),
        "omega": q.omega.tolist(),
    }


def from_record(record: dict) -> StructuredGaussian:
    try:
        T = int(record["T"])
        q = structured_gaussian(record["mu"], record["nu"], record["omega"])
    except KeyError as e:
        raise ValueError(f"parameter record is missing field {e}") from e
    if q.T != T:
        raise ValueError(f"record says T={T} but mu has length {q.T}")
    return q
