"""Generative-model contract for latent time series and three built-in models.

A model owns its observations and exposes per-step log-densities and their
first derivatives with respect to the latent. Time indices are 0-based:
``log_init`` covers step 0, ``log_trans(t, z_t, z_prev)`` covers the move
into step t >= 1. All callbacks accept scalars or aligned numpy arrays of
step indices, so assembling the full log-joint or its per-step gradient is
a handful of vectorized operations.

Missing observations are handled with a per-step mask: both log_lik and
dlog_lik are identically zero on held-out steps.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import expit, gammaln

LOG_2PI = math.log(2.0 * math.pi)

# exp(z) is clamped at this point in derivative paths; see OUPoissonModel.
POISSON_RATE_CLAMP = 30.0


class TimeSeriesModel:
    """Contract: per-step likelihood, Markov transition, initial density,
    and the first derivative of each with respect to the latent coordinate.

    Subclasses must be deterministic and finite-valued on finite inputs,
    and their derivative callbacks must match finite differences of the
    corresponding log-density.
    """

    T: int

    def log_lik(self, t, z):
        raise NotImplementedError

    def dlog_lik(self, t, z):
        raise NotImplementedError

    def log_trans(self, t, z_curr, z_prev):
        raise NotImplementedError

    def dlog_trans_curr(self, t, z_curr, z_prev):
        raise NotImplementedError

    def dlog_trans_prev(self, t, z_curr, z_prev):
        raise NotImplementedError

    def log_init(self, z):
        raise NotImplementedError

    def dlog_init(self, z):
        raise NotImplementedError

    def prior_marginal_std(self) -> np.ndarray:
        """Per-step prior standard deviation, used to initialize trainers."""
        raise NotImplementedError


def _check_z(model, z):
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (model.T,):
        raise ValueError(f"z must have shape ({model.T},), got {z.shape}")
    return z


def log_joint(model: TimeSeriesModel, z) -> float:
    """log p(x, z) = log p(z_0) + sum_t log p(z_t | z_{t-1}) + sum_t log p(x_t | z_t)."""
    z = _check_z(model, z)
    T = model.T
    total = float(model.log_init(z[0]))
    total += float(np.sum(model.log_lik(np.arange(T), z)))
    if T > 1:
        ts = np.arange(1, T)
        total += float(np.sum(model.log_trans(ts, z[1:], z[:-1])))
    return total


def log_joint_grad(model: TimeSeriesModel, z) -> np.ndarray:
    """Per-step derivative of the log-joint at z.

    Each coordinate collects the three local terms that depend on z_t: the
    transition into t, the transition out of t, and the likelihood at t.
    The outgoing term is absent at t = T-1 and the incoming term at t = 0
    is the initial density.
    """
    z = _check_z(model, z)
    T = model.T
    g = np.asarray(model.dlog_lik(np.arange(T), z), dtype=np.float64).copy()
    g[0] += model.dlog_init(z[0])
    if T > 1:
        ts = np.arange(1, T)
        g[1:] += model.dlog_trans_curr(ts, z[1:], z[:-1])
        g[:-1] += model.dlog_trans_prev(ts, z[1:], z[:-1])
    return g


def _prepare_mask(mask, T):
    if mask is None:
        return np.ones(T, dtype=bool)
    m = np.asarray(mask)
    if m.shape != (T,):
        raise ValueError(f"mask must have shape ({T},), got {m.shape}")
    return m.astype(bool)


class WienerGaussianModel(TimeSeriesModel):
    """Random-walk prior with Gaussian observations; the conjugate case.

    p(z_0) = N(0, sigma0^2), p(z_t | z_{t-1}) = N(z_{t-1}, sigma^2),
    p(x_t | z_t) = N(x_t; z_t, 1/tau). The exact posterior is available
    from the smoother module.
    """

    def __init__(self, x, sigma0, sigma, tau, mask=None):
        if sigma0 <= 0 or sigma <= 0 or tau <= 0:
            raise ValueError("sigma0, sigma and tau must be positive")
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1 or x.size < 1:
            raise ValueError("x must be a non-empty vector")
        self.x = x
        self.T = x.size
        self.sigma0 = float(sigma0)
        self.sigma = float(sigma)
        self.tau = float(tau)
        self.mask = _prepare_mask(mask, self.T)

    def log_lik(self, t, z):
        val = -0.5 * (LOG_2PI - np.log(self.tau)) \
            - 0.5 * self.tau * (self.x[t] - z) ** 2
        return np.where(self.mask[t], val, 0.0)

    def dlog_lik(self, t, z):
        return np.where(self.mask[t], self.tau * (self.x[t] - z), 0.0)

    def log_trans(self, t, z_curr, z_prev):
        d = z_curr - z_prev
        return -0.5 * LOG_2PI - math.log(self.sigma) - 0.5 * d * d / self.sigma ** 2

    def dlog_trans_curr(self, t, z_curr, z_prev):
        return -(z_curr - z_prev) / self.sigma ** 2

    def dlog_trans_prev(self, t, z_curr, z_prev):
        return (z_curr - z_prev) / self.sigma ** 2

    def log_init(self, z):
        return -0.5 * LOG_2PI - math.log(self.sigma0) - 0.5 * z * z / self.sigma0 ** 2

    def dlog_init(self, z):
        return -z / self.sigma0 ** 2

    def prior_marginal_std(self):
        # Var(z_t) = sigma0^2 + t sigma^2 for the random walk.
        return np.sqrt(self.sigma0 ** 2 + np.arange(self.T) * self.sigma ** 2)


class _OULatentModel(TimeSeriesModel):
    """Shared mean-reverting prior: z_0 ~ N(0, sigma^2/(1-c^2)) (the stationary
    law), z_t | z_{t-1} ~ N(c z_{t-1}, sigma^2), with 0 < c < 1.
    """

    def __init__(self, T, c, sigma):
        if not 0.0 < c < 1.0:
            raise ValueError(f"c must lie in (0, 1), got {c}")
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        self.T = T
        self.c = float(c)
        self.sigma = float(sigma)
        self.var0 = sigma ** 2 / (1.0 - c ** 2)

    def log_trans(self, t, z_curr, z_prev):
        d = z_curr - self.c * z_prev
        return -0.5 * LOG_2PI - math.log(self.sigma) - 0.5 * d * d / self.sigma ** 2

    def dlog_trans_curr(self, t, z_curr, z_prev):
        return -(z_curr - self.c * z_prev) / self.sigma ** 2

    def dlog_trans_prev(self, t, z_curr, z_prev):
        return self.c * (z_curr - self.c * z_prev) / self.sigma ** 2

    def log_init(self, z):
        return -0.5 * (LOG_2PI + math.log(self.var0)) - 0.5 * z * z / self.var0

    def dlog_init(self, z):
        return -z / self.var0

    def prior_marginal_std(self):
        return np.full(self.T, math.sqrt(self.var0))


class OUPoissonModel(_OULatentModel):
    """Mean-reverting prior with count observations x_t ~ Poisson(exp(z_t)).

    The log(x_t!) constant is kept in log_lik (it matters for ELBO
    comparability) but cancels out of every gradient path. The rate exp(z)
    is clamped at z = 30 in derivative paths only; ``clamp_events`` counts
    how often the guard fired so converged fits can be audited.
    """

    def __init__(self, x, c, sigma, mask=None):
        x = np.asarray(x)
        if x.ndim != 1 or x.size < 1:
            raise ValueError("x must be a non-empty vector of counts")
        if np.any(x < 0) or np.any(x != np.floor(x)):
            raise ValueError("observations must be non-negative integer counts")
        super().__init__(x.size, c, sigma)
        self.x = x.astype(np.float64)
        self.mask = _prepare_mask(mask, self.T)
        self.clamp_events = 0

    def log_lik(self, t, z):
        val = self.x[t] * z - np.exp(z) - gammaln(self.x[t] + 1.0)
        return np.where(self.mask[t], val, 0.0)

    def dlog_lik(self, t, z):
        clamped = np.minimum(z, POISSON_RATE_CLAMP)
        n_hit = int(np.sum((np.asarray(z) > POISSON_RATE_CLAMP) & self.mask[t]))
        if n_hit:
            self.clamp_events += n_hit
        return np.where(self.mask[t], self.x[t] - np.exp(clamped), 0.0)


class OUBernoulliModel(_OULatentModel):
    """Mean-reverting prior with binary observations through a logistic link.

    log p(x_t | z_t) = x_t z_t - softplus(z_t), evaluated in the
    log-sum-exp form so |z| = 500 stays finite.
    """

    def __init__(self, x, c, sigma, mask=None):
        x = np.asarray(x)
        if x.ndim != 1 or x.size < 1:
            raise ValueError("x must be a non-empty binary vector")
        if not np.all((x == 0) | (x == 1)):
            raise ValueError("observations must be 0/1 valued")
        super().__init__(x.size, c, sigma)
        self.x = x.astype(np.float64)
        self.mask = _prepare_mask(mask, self.T)

    def log_lik(self, t, z):
        z = np.asarray(z, dtype=np.float64)
        softplus = np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))
        return np.where(self.mask[t], self.x[t] * z - softplus, 0.0)

    def dlog_lik(self, t, z):
        return np.where(self.mask[t], self.x[t] - expit(z), 0.0)


def wiener_gaussian(x, sigma0, sigma, tau, mask=None) -> WienerGaussianModel:
    return WienerGaussianModel(x, sigma0, sigma, tau, mask=mask)


def ou_poisson(x, c, sigma, mask=None) -> OUPoissonModel:
    return OUPoissonModel(x, c, sigma, mask=mask)


def ou_bernoulli(x, c, sigma, mask=None) -> OUBernoulliModel:
    return OUBernoulliModel(x, c, sigma, mask=mask)


def simulate_latents(name, T, rng, hyper):
    """Draw a latent path from the prior of the named built-in model."""
    if name == "wiener_gaussian":
        steps = rng.standard_normal(T) * hyper["sigma"]
        steps[0] = rng.standard_normal() * hyper["sigma0"]
        return np.cumsum(steps)
    z = np.empty(T)
    c, sigma = hyper["c"], hyper["sigma"]
    z[0] = rng.standard_normal() * sigma / math.sqrt(1.0 - c ** 2)
    for t in range(1, T):
        z[t] = c * z[t - 1] + sigma * rng.standard_normal()
    return z


def simulate_observations(name, T, seed, hyper):
    """Simulate (x, z) from the named built-in model; used by tests and the CLI."""
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0x0B5)))
    z = simulate_latents(name, T, rng, hyper)
    if name == "wiener_gaussian":
        x = z + rng.standard_normal(T) / math.sqrt(hyper["tau"])
    elif name == "ou_poisson":
        x = rng.poisson(np.exp(np.clip(z, None, POISSON_RATE_CLAMP))).astype(float)
    elif name == "ou_bernoulli":
        x = (rng.random(T) < expit(z)).astype(float)
    else:
        raise ValueError(f"unknown model name {name!r}")
    return x, z


MODEL_BUILDERS = {
    "wiener_gaussian": wiener_gaussian,
    "ou_poisson": ou_poisson,
    "ou_bernoulli": ou_bernoulli,
}
