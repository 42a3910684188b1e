"""Stochastic-gradient ELBO maximization over the structured family.

Optimization runs in unconstrained coordinates (mu, rho = log nu, omega);
the chain rule g_rho = nu * g_nu keeps nu positive structurally. Adam is
the default because mu, rho and omega live on very different scales; plain
SGD with a 1/sqrt(step) decay is available.

Seeding: step k of a fit keyed by ``seed`` draws its noise batch from a
substream derived from (seed, 1, k); the final reported ELBO uses
(seed, 2, steps_run); chain c of a multi-chain fit uses (seed, 3, c).
Everything downstream is bitwise reproducible from the config alone.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import family
from .errors import DivergenceError
from .family import StructuredGaussian, sample_batch
from .gradients import DENSE_GUARD, estimate_elbo, estimate_gradient, estimate_gradient_dense
from .models import TimeSeriesModel


@dataclass(frozen=True)
class FitConfig:
    max_steps: int = 20000
    S: int = 1
    learning_rate: float = 0.05
    optimizer: str = "adam"  # "adam" or "sgd"
    beta1: float = 0.9
    beta2: float = 0.999
    delta: float = 1e-8
    seed: int = 0
    init: str = "mean_field_prior"  # or "custom" with init_params set
    init_params: StructuredGaussian | None = None
    convergence_window: int = 500
    convergence_tol: float = 1e-5
    eval_S: int = 64
    # fraction of the step budget (from the end) whose iterates are averaged
    # into the reported parameters; 0 reports the last iterate
    average_fraction: float = 0.5

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.S < 1 or self.eval_S < 1:
            raise ValueError("S and eval_S must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.init == "custom" and self.init_params is None:
            raise ValueError("init='custom' requires init_params")
        if self.convergence_window < 1:
            raise ValueError("convergence_window must be >= 1")
        if not 0.0 <= self.average_fraction <= 1.0:
            raise ValueError("average_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class FitReport:
    final_params: StructuredGaussian
    elbo_trace: np.ndarray  # columns: step, smoothed ELBO
    elbo_raw: np.ndarray
    step_seconds: np.ndarray
    steps_run: int
    wall_clock_per_step: float
    seed: int
    converged: bool
    final_elbo: float


@dataclass(frozen=True)
class MultiFitReport:
    """Independent per-dimension chains fit in parallel, concatenated."""

    reports: list[FitReport] = field(default_factory=list)

    @property
    def means(self) -> np.ndarray:
        return np.stack([r.final_params.mu for r in self.reports])


def derive_seed(*parts) -> int:
    """Deterministic integer sub-seed from a tuple of non-negative ints."""
    ss = np.random.SeedSequence(tuple(int(p) for p in parts))
    return int(ss.generate_state(1, np.uint64)[0])


def worker_count() -> int:
    """Worker cap from STRUCTVI_THREADS; 0 or unset means one per CPU."""
    raw = os.environ.get("STRUCTVI_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"STRUCTVI_THREADS must be an integer, got {raw!r}")
    return os.cpu_count() or 1 if n <= 0 else n


def _initial_params(model: TimeSeriesModel, cfg: FitConfig) -> StructuredGaussian:
    if cfg.init == "custom":
        if cfg.init_params.T != model.T:
            raise ValueError("init_params dimension does not match the model")
        return cfg.init_params
    if cfg.init != "mean_field_prior":
        raise ValueError(f"unknown init {cfg.init!r}")
    # Mean-field start at roughly the prior's marginal scale.
    nu = 1.0 / model.prior_marginal_std()
    return family.mean_field(np.zeros(model.T), nu)


def fit(model: TimeSeriesModel, cfg: FitConfig) -> FitReport:
    """Maximize the ELBO over the full structured family."""
    return _fit_loop(model, cfg, structured=True)


def fit_mean_field(model: TimeSeriesModel, cfg: FitConfig) -> FitReport:
    """Identical loop with omega pinned at zero (its gradients discarded)."""
    return _fit_loop(model, cfg, structured=False)


def _fit_loop(model: TimeSeriesModel, cfg: FitConfig, structured: bool) -> FitReport:
    q0 = _initial_params(model, cfg)
    T = model.T
    mu = q0.mu.copy()
    rho = np.log(q0.nu)
    omega = q0.omega.copy()
    if not structured:
        omega = np.zeros_like(omega)

    n_par = 3 * T - 1
    m1 = np.zeros(n_par)
    m2 = np.zeros(n_par)
    theta = np.concatenate([mu, rho, omega])

    smoothed = np.empty(cfg.max_steps)
    raw = np.empty(cfg.max_steps)
    seconds = np.empty(cfg.max_steps)
    alpha = 1.0 / cfg.convergence_window
    converged = False
    steps_run = 0

    # Polyak tail averaging: constant-rate Adam orbits the optimum inside a
    # noise ball proportional to the learning rate; averaging the tail
    # iterates collapses that ball without touching the step sizes.
    avg_start = cfg.max_steps - int(cfg.average_fraction * cfg.max_steps)
    avg_sum = np.zeros(n_par)
    avg_count = 0
    t_start = time.perf_counter()

    for k in range(1, cfg.max_steps + 1):
        t0 = time.perf_counter()
        with np.errstate(over="ignore"):
            nu = np.exp(theta[T:2 * T])
        if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(nu))
                and np.all(nu > 0.0)):
            raise DivergenceError(
                f"parameters became non-finite or degenerate at step {k}",
                step=k,
                params={"T": T, "mu": theta[:T].tolist(), "nu": nu.tolist(),
                        "omega": theta[2 * T:].tolist()},
            )
        q = StructuredGaussian(theta[:T], family.BidiagUpper(nu, theta[2 * T:]))
        batch = sample_batch(q, derive_seed(cfg.seed, 1, k), cfg.S)
        est = estimate_gradient(model, q, batch)

        g_rho = q.nu * est.g_nu
        g_omega = est.g_omega if structured else np.zeros_like(est.g_omega)
        grad = np.concatenate([est.g_mu, g_rho, g_omega])

        if not (np.isfinite(est.elbo_estimate) and np.all(np.isfinite(grad))):
            raise DivergenceError(
                f"non-finite gradient or ELBO at step {k}",
                step=k, params=family.to_record(q),
            )

        if cfg.optimizer == "adam":
            m1 = cfg.beta1 * m1 + (1.0 - cfg.beta1) * grad
            m2 = cfg.beta2 * m2 + (1.0 - cfg.beta2) * grad * grad
            m1_hat = m1 / (1.0 - cfg.beta1 ** k)
            m2_hat = m2 / (1.0 - cfg.beta2 ** k)
            theta = theta + cfg.learning_rate * m1_hat / (np.sqrt(m2_hat) + cfg.delta)
        else:
            theta = theta + cfg.learning_rate / math.sqrt(k) * grad

        if k > avg_start:
            avg_sum += theta
            avg_count += 1

        i = k - 1
        raw[i] = est.elbo_estimate
        smoothed[i] = est.elbo_estimate if i == 0 else \
            (1.0 - alpha) * smoothed[i - 1] + alpha * est.elbo_estimate
        seconds[i] = time.perf_counter() - t0
        steps_run = k

        # compare window endpoints only; per-step checks would give noise
        # thousands of chances to produce a spuriously tiny difference
        w = cfg.convergence_window
        if k >= 2 * w and k % w == 0:
            change = abs(smoothed[i] - smoothed[i - w])
            if change < cfg.convergence_tol * max(1.0, abs(smoothed[i])):
                converged = True
                break

    total = time.perf_counter() - t_start
    final_theta = avg_sum / avg_count if avg_count > 0 else theta
    final_q = StructuredGaussian(
        final_theta[:T],
        family.BidiagUpper(np.exp(final_theta[T:2 * T]), final_theta[2 * T:])
    )
    eval_batch = sample_batch(final_q, derive_seed(cfg.seed, 2, steps_run), cfg.eval_S)
    final_elbo = estimate_elbo(model, final_q, eval_batch)

    steps = np.arange(1, steps_run + 1, dtype=float)
    return FitReport(
        final_params=final_q,
        elbo_trace=np.column_stack([steps, smoothed[:steps_run]]),
        elbo_raw=raw[:steps_run].copy(),
        step_seconds=seconds[:steps_run].copy(),
        steps_run=steps_run,
        wall_clock_per_step=total / steps_run,
        seed=cfg.seed,
        converged=converged,
        final_elbo=final_elbo,
    )


def fit_chains(models: list[TimeSeriesModel], cfg: FitConfig,
               structured: bool = True) -> MultiFitReport:
    """Fit independent latent chains in parallel with derived per-chain seeds."""
    runner = fit if structured else fit_mean_field
    configs = [replace(cfg, seed=derive_seed(cfg.seed, 3, c))
               for c in range(len(models))]
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        reports = list(pool.map(runner, models, configs))
    return MultiFitReport(reports=reports)


def _median_step_time(fn, reps: int) -> float:
    fn()  # warm-up excluded from the statistics
    times = np.empty(reps)
    for r in range(reps):
        t0 = time.perf_counter()
        fn()
        times[r] = time.perf_counter() - t0
    return float(np.median(times))


def benchmark_scaling(model_family, Ts, cfg: FitConfig, reps: int = 20,
                      variants=("linear", "dense")):
    """Median time of one gradient estimate per T and estimator variant.

    ``model_family`` maps T to a model instance. The dense variant is
    skipped above its size guard. Batches are drawn outside the timed
    region, so the numbers isolate gradient-estimation cost.
    """
    if list(Ts) != sorted(Ts):
        raise ValueError("Ts must be sorted ascending")
    rows = []
    for T in Ts:
        model = model_family(T)
        q = _initial_params(model, cfg)
        batch = sample_batch(q, derive_seed(cfg.seed, 4, T), cfg.S)
        for variant in variants:
            if variant == "linear":
                fn = lambda: estimate_gradient(model, q, batch)
            elif variant == "dense":
                if T > DENSE_GUARD:
                    continue
                fn = lambda: estimate_gradient_dense(model, q, batch)
            else:
                raise ValueError(f"unknown variant {variant!r}")
            rows.append({
                "T": T,
                "variant": variant,
                "median_seconds_per_step": _median_step_time(fn, reps),
            })
    return rows


def loglog_slope(Ts, times) -> float:
    """Fitted exponent of time against T on log-log axes."""
    Ts = np.asarray(Ts, dtype=float)
    times = np.asarray(times, dtype=float)
    if Ts.size < 2:
        raise ValueError("need at least two points to fit a slope")
    return float(np.polyfit(np.log(Ts), np.log(times), 1)[0])
