import numpy as np
import pytest
import scipy.stats

from structvi import models
from structvi.models import (
    log_joint,
    log_joint_grad,
    ou_bernoulli,
    ou_poisson,
    wiener_gaussian,
)
from structvi.smoother import prior_precision
from structvi.bidiag import tridiag_to_dense

from helpers import MODEL_NAMES, central_diff, random_model


def test_constructor_validation():
    with pytest.raises(ValueError):
        wiener_gaussian([0.0], sigma0=-1.0, sigma=1.0, tau=1.0)
    with pytest.raises(ValueError):
        wiener_gaussian([0.0], sigma0=1.0, sigma=1.0, tau=0.0)
    with pytest.raises(ValueError):
        ou_poisson([1.0, -2.0], c=0.5, sigma=1.0)
    with pytest.raises(ValueError):
        ou_poisson([1.0, 2.5], c=0.5, sigma=1.0)  # non-integer counts
    with pytest.raises(ValueError):
        ou_poisson([1.0], c=1.0, sigma=1.0)  # c outside (0, 1)
    with pytest.raises(ValueError):
        ou_bernoulli([0.0, 2.0], c=0.5, sigma=1.0)  # non-binary


def test_wiener_scores():
    m = wiener_gaussian([1.0, 3.0], sigma0=1.0, sigma=2.0, tau=0.5)
    assert m.dlog_lik(1, 1.0) == pytest.approx(0.5 * (3.0 - 1.0))
    assert m.dlog_trans_curr(1, 2.0, 0.5) == pytest.approx(-(2.0 - 0.5) / 4.0)
    assert m.dlog_trans_prev(1, 2.0, 0.5) == pytest.approx((2.0 - 0.5) / 4.0)


def test_wiener_log_joint_t1():
    m = wiener_gaussian([0.0], sigma0=1.0, sigma=1.0, tau=1.0)
    assert log_joint(m, np.zeros(1)) == pytest.approx(-np.log(2 * np.pi), abs=1e-12)
    m2 = wiener_gaussian([2.0], sigma0=1.0, sigma=1.0, tau=1.0)
    assert log_joint(m2, np.array([1.0])) == pytest.approx(
        -np.log(2 * np.pi) - 1.0, abs=1e-12)


def test_log_joint_purity():
    rng = np.random.default_rng(1)
    m = random_model(rng, "ou_poisson", 6)
    z = rng.normal(0.0, 1.0, 6)
    assert log_joint(m, z) == log_joint(m, z)


def test_ou_poisson_scores():
    m = ou_poisson([3.0, 0.0], c=0.5, sigma=1.0)
    assert m.dlog_lik(0, 0.0) == pytest.approx(2.0)  # 3 - e^0
    assert m.dlog_trans_prev(1, 1.0, 0.4) == pytest.approx(
        0.5 * (1.0 - 0.5 * 0.4) / 1.0)


def test_ou_poisson_log_joint_t1():
    m = ou_poisson([0.0], c=0.5, sigma=1.0)
    expect = m.log_init(0.0) - 1.0  # Poisson pmf at k=0, rate e^0
    assert log_joint(m, np.zeros(1)) == pytest.approx(float(expect), abs=1e-12)


def test_ou_poisson_keeps_factorial_constant():
    m = ou_poisson([4.0], c=0.5, sigma=1.0)
    assert float(m.log_lik(0, 1.3)) == pytest.approx(
        scipy.stats.poisson.logpmf(4, np.exp(1.3)), abs=1e-12)


def test_ou_poisson_clamp_counter():
    m = ou_poisson([2.0, 2.0], c=0.5, sigma=1.0)
    val = m.dlog_lik(0, 40.0)
    assert np.isfinite(val)
    assert float(val) == pytest.approx(2.0 - np.exp(30.0))
    assert m.clamp_events == 1
    m.dlog_lik(np.arange(2), np.array([35.0, 0.0]))
    assert m.clamp_events == 2


def test_ou_bernoulli_scores_and_stability():
    m = ou_bernoulli([1.0, 0.0], c=0.5, sigma=1.0)
    assert m.dlog_lik(0, 0.0) == pytest.approx(0.5)
    assert float(m.log_lik(0, 0.0)) == pytest.approx(np.log(0.5))
    assert float(m.log_lik(1, 0.0)) == pytest.approx(np.log(0.5))
    for z in (-500.0, 500.0):
        assert np.isfinite(m.log_lik(0, z))
        assert np.isfinite(m.dlog_lik(0, z))


@pytest.mark.parametrize("name", MODEL_NAMES)
def test_derivatives_match_finite_differences(name):
    rng = np.random.default_rng(5)
    m = random_model(rng, name, 4)
    for _ in range(5):
        z, zp = rng.normal(0.0, 1.0, 2)
        t = int(rng.integers(0, 4))
        fd = central_diff(lambda v: float(m.log_lik(t, v[0])), np.array([z]))[0]
        assert float(m.dlog_lik(t, z)) == pytest.approx(fd, abs=1e-6)
        fd = central_diff(lambda v: float(m.log_init(v[0])), np.array([z]))[0]
        assert float(m.dlog_init(z)) == pytest.approx(fd, abs=1e-6)
        t = int(rng.integers(1, 4))
        fd = central_diff(lambda v: float(m.log_trans(t, v[0], zp)), np.array([z]))[0]
        assert float(m.dlog_trans_curr(t, z, zp)) == pytest.approx(fd, abs=1e-6)
        fd = central_diff(lambda v: float(m.log_trans(t, z, v[0])), np.array([zp]))[0]
        assert float(m.dlog_trans_prev(t, z, zp)) == pytest.approx(fd, abs=1e-6)


def test_grad_examples_wiener():
    m = wiener_gaussian([0.0, 2.0], sigma0=1.0, sigma=1.0, tau=1.0)
    assert np.allclose(log_joint_grad(m, np.zeros(2)), [0.0, 2.0])
    fd = central_diff(lambda z: log_joint(m, z), np.zeros(2), h=1e-5)
    assert np.allclose(log_joint_grad(m, np.zeros(2)), fd, atol=1e-6)

    m1 = wiener_gaussian([0.0], sigma0=1.0, sigma=1.0, tau=1.0)
    assert np.allclose(log_joint_grad(m1, np.zeros(1)), [0.0])


@pytest.mark.parametrize("name", MODEL_NAMES)
@pytest.mark.parametrize("T", [1, 2, 5])
def test_grad_matches_log_joint_finite_differences(name, T):
    rng = np.random.default_rng(T * 101 + hash(name) % 97)
    for _ in range(3):
        m = random_model(rng, name, T)
        z = rng.normal(0.0, 1.0, T)
        fd = central_diff(lambda v: log_joint(m, v), z, h=1e-5)
        assert np.allclose(log_joint_grad(m, z), fd, atol=1e-6)


def test_wiener_log_joint_dense_identity():
    rng = np.random.default_rng(9)
    for T in (1, 4, 32):
        sigma0, sigma, tau = 0.8, 1.3, 0.6
        x = rng.normal(0.0, 1.0, T)
        z = rng.normal(0.0, 1.0, T)
        m = wiener_gaussian(x, sigma0=sigma0, sigma=sigma, tau=tau)
        lam0 = tridiag_to_dense(prior_precision(sigma0, sigma, T))
        prior = scipy.stats.multivariate_normal(
            mean=np.zeros(T), cov=np.linalg.inv(lam0)).logpdf(z)
        lik = np.sum(scipy.stats.norm.logpdf(x, loc=z, scale=1 / np.sqrt(tau)))
        assert log_joint(m, z) == pytest.approx(float(prior + lik), abs=1e-10)


def test_mask_zeroes_out_likelihood():
    x = np.array([1.0, 2.0, 3.0])
    m = wiener_gaussian(x, 1.0, 1.0, 1.0, mask=[1, 0, 1])
    assert float(m.log_lik(1, 0.5)) == 0.0
    assert float(m.dlog_lik(1, 0.5)) == 0.0
    assert float(m.log_lik(0, 0.5)) != 0.0

    full = wiener_gaussian(x, 1.0, 1.0, 1.0)
    z = np.array([0.1, -0.2, 0.4])
    dropped = log_joint(full, z) - float(full.log_lik(1, z[1]))
    assert log_joint(m, z) == pytest.approx(dropped, abs=1e-12)
    # gradients still satisfy the finite-difference identity under masking
    fd = central_diff(lambda v: log_joint(m, v), z, h=1e-5)
    assert np.allclose(log_joint_grad(m, z), fd, atol=1e-6)


def test_prior_marginal_std():
    m = wiener_gaussian(np.zeros(3), sigma0=2.0, sigma=1.0, tau=1.0)
    assert np.allclose(m.prior_marginal_std(), np.sqrt([4.0, 5.0, 6.0]))
    ou = ou_poisson(np.zeros(3), c=0.5, sigma=1.0)
    assert np.allclose(ou.prior_marginal_std(), np.sqrt(1.0 / 0.75))


def test_simulate_observations_shapes_and_determinism():
    for name in MODEL_NAMES:
        hyper = {"sigma0": 1.0, "sigma": 1.0, "tau": 1.0} \
            if name == "wiener_gaussian" else {"c": 0.5, "sigma": 1.0}
        x1, z1 = models.simulate_observations(name, 10, 3, hyper)
        x2, z2 = models.simulate_observations(name, 10, 3, hyper)
        assert x1.shape == (10,) and z1.shape == (10,)
        assert np.array_equal(x1, x2) and np.array_equal(z1, z2)
    x, _ = models.simulate_observations("ou_poisson", 50, 1, {"c": 0.5, "sigma": 1.0})
    assert np.all(x >= 0) and np.all(x == np.floor(x))
    x, _ = models.simulate_observations("ou_bernoulli", 50, 1, {"c": 0.5, "sigma": 1.0})
    assert set(np.unique(x)) <= {0.0, 1.0}
