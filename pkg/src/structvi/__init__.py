"""Structured black-box variational inference for latent time series models.

A Gaussian variational family with tridiagonal precision, parameterized by
its bidiagonal Cholesky factor, gives O(T) sampling, entropy and
reparameterization gradients for arbitrary Markov latent time series
models. An exact linear-Gaussian smoother and a deliberately quadratic
reference estimator serve as ground truth.
"""

from .bidiag import (
    BidiagUpper,
    SymTridiag,
    log_det,
    matvec_upper,
    solve_lower_transpose,
    solve_upper,
    to_dense,
    tridiag_solve,
)
from .errors import DivergenceError, NotPositiveDefiniteError
from .family import (
    NoiseDraw,
    StructuredGaussian,
    entropy,
    log_density,
    marginal_variances,
    mean_field,
    reparameterize,
    sample_batch,
    structured_gaussian,
)
from .gradients import (
    GradEstimate,
    estimate_elbo,
    estimate_gradient,
    estimate_gradient_dense,
)
from .models import (
    OUBernoulliModel,
    OUPoissonModel,
    TimeSeriesModel,
    WienerGaussianModel,
    log_joint,
    log_joint_grad,
    ou_bernoulli,
    ou_poisson,
    wiener_gaussian,
)
from .smoother import (
    WienerPosterior,
    as_structured_gaussian,
    exact_posterior,
    kl_from_posterior,
    log_evidence,
    posterior_marginal_variances,
    prior_precision,
)
from .training import (
    FitConfig,
    FitReport,
    MultiFitReport,
    benchmark_scaling,
    fit,
    fit_chains,
    fit_mean_field,
)

__version__ = "0.1.0"
