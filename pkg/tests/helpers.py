"""Shared test oracles: dense references and finite differences.

Everything here deliberately goes through dense numpy/scipy routines or
brute-force loops, independent of the O(T) paths under test.
"""

import numpy as np

from structvi import bidiag, family
from structvi import models as md
from structvi.bidiag import BidiagUpper
from structvi.family import StructuredGaussian

MODEL_NAMES = ("wiener_gaussian", "ou_poisson", "ou_bernoulli")


def random_factor(rng, T):
    return BidiagUpper(rng.uniform(0.5, 2.0, T),
                       rng.uniform(-1.0, 1.0, max(T - 1, 0)))


def random_gaussian(rng, T):
    return StructuredGaussian(rng.normal(0.0, 1.0, T), random_factor(rng, T))


def dense_precision(q):
    Bd = bidiag.to_dense(q.factor)
    return Bd.T @ Bd


def dense_covariance(q):
    return np.linalg.inv(dense_precision(q))


def dense_entropy(q):
    sign, logdet = np.linalg.slogdet(dense_precision(q))
    assert sign > 0
    return 0.5 * q.T * np.log(2.0 * np.pi * np.e) - 0.5 * logdet


def central_diff(f, x, h=1e-5):
    x = np.asarray(x, dtype=float)
    g = np.empty(x.size)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2.0 * h)
    return g


def random_model(rng, name, T):
    if name == "wiener_gaussian":
        return md.wiener_gaussian(rng.normal(0.0, 1.5, T),
                                  sigma0=rng.uniform(0.5, 1.5),
                                  sigma=rng.uniform(0.5, 1.5),
                                  tau=rng.uniform(0.5, 2.0))
    if name == "ou_poisson":
        return md.ou_poisson(rng.poisson(2.0, T).astype(float),
                             c=rng.uniform(0.3, 0.9),
                             sigma=rng.uniform(0.5, 1.5))
    if name == "ou_bernoulli":
        return md.ou_bernoulli((rng.random(T) < 0.5).astype(float),
                               c=rng.uniform(0.3, 0.9),
                               sigma=rng.uniform(0.5, 1.5))
    raise ValueError(name)


def fixed_noise_objective(model, T, eps_list):
    """The deterministic map (mu, nu, omega) -> ELBO at a frozen noise batch.

    Rebuilds everything from the flat parameter vector so finite differences
    probe the same function the gradient estimators differentiate.
    """

    def f(theta):
        mu = theta[:T]
        q = StructuredGaussian(mu, BidiagUpper(theta[T:2 * T], theta[2 * T:]))
        total = 0.0
        for eps in eps_list:
            z = mu + bidiag.solve_upper(q.factor, eps)
            total += md.log_joint(model, z)
        return total / len(eps_list) + family.entropy(q)

    return f


def pack_params(q):
    return np.concatenate([q.mu, q.nu, q.omega])


def grad_as_vector(est):
    return np.concatenate([est.g_mu, est.g_nu, est.g_omega])
