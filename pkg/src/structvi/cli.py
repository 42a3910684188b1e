"""Command-line interface.

Subcommands: ``fit`` (train a variational posterior), ``oracle-check``
(exact smoother, optionally compared against a fitted posterior),
``benchmark`` (gradient-step scaling), ``sample`` (draw from saved
parameters). Configuration comes from a JSON file via --config with
individual flags overriding; numeric outputs are CSV files with a header
row and 17-significant-digit floats, each accompanied by a rendered PNG.

Exit codes: 0 success, 2 configuration error, 3 divergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import family, models, report, smoother, training
from .errors import DivergenceError
from .family import sample_batch
from .training import FitConfig, fit, fit_mean_field


class ConfigError(Exception):
    pass


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _write_csv(path: Path, header: str, rows) -> None:
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(str(c) if isinstance(c, (int, str)) else _fmt(c)
                              for c in row) + "\n")


def _load_config(path) -> dict:
    if path is None:
        raise ConfigError("a --config file is required")
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        with open(p) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as e:
        raise ConfigError(f"could not parse {p}: {e}")
    if not isinstance(cfg, dict):
        raise ConfigError(f"config must be a JSON object, got {type(cfg).__name__}")
    return cfg


def _load_observations(cfg: dict, base: Path) -> np.ndarray:
    if "observations" in cfg:
        return np.asarray(cfg["observations"], dtype=np.float64)
    if "observations_csv" in cfg:
        path = Path(cfg["observations_csv"])
        if not path.is_absolute():
            path = base / path
        if not path.exists():
            raise ConfigError(f"observations file not found: {path}")
        return np.loadtxt(path, dtype=np.float64, ndmin=1)
    raise ConfigError("config must provide 'observations' or 'observations_csv'")


_HYPER_KEYS = {
    "wiener_gaussian": ("sigma0", "sigma", "tau"),
    "ou_poisson": ("c", "sigma"),
    "ou_bernoulli": ("c", "sigma"),
}


def _model_hyper(cfg: dict) -> tuple[str, dict]:
    name = cfg.get("model")
    if name not in models.MODEL_BUILDERS:
        raise ConfigError(
            f"config field 'model' must be one of {sorted(models.MODEL_BUILDERS)}, "
            f"got {name!r}")
    try:
        hyper = {k: float(cfg[k]) for k in _HYPER_KEYS[name]}
    except KeyError as e:
        raise ConfigError(f"model {name!r} requires hyperparameter {e}")
    return name, hyper


def _build_model(cfg: dict, base: Path):
    name, hyper = _model_hyper(cfg)
    x = _load_observations(cfg, base)
    mask = cfg.get("mask")
    if mask is not None:
        mask = np.asarray(mask)
        if mask.shape != x.shape:
            raise ConfigError("mask length must match the observations")
        mask = mask.astype(bool)  # 1 = include, 0 = hold out
    try:
        return models.MODEL_BUILDERS[name](x, **hyper, mask=mask)
    except ValueError as e:
        raise ConfigError(str(e))


def _fit_config(cfg: dict, args) -> FitConfig:
    kw = {}
    for key in ("max_steps", "S", "learning_rate", "optimizer", "beta1", "beta2",
                "delta", "seed", "convergence_window", "convergence_tol", "eval_S"):
        if key in cfg:
            kw[key] = cfg[key]
    if args.seed is not None:
        kw["seed"] = args.seed
    if args.steps is not None:
        kw["max_steps"] = args.steps
    if args.lr is not None:
        kw["learning_rate"] = args.lr
    if args.samples is not None:
        kw["S"] = args.samples
    try:
        return FitConfig(**kw)
    except (ValueError, TypeError) as e:
        raise ConfigError(str(e))


def _out_dir(args) -> Path:
    out = Path(args.out if args.out is not None else ".")
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigError(f"cannot create output directory {out}: {e}")
    return out


def _variant(cfg: dict, args) -> str:
    variant = args.variant if args.variant is not None else cfg.get("variant",
                                                                    "structured")
    if variant not in ("structured", "mean_field"):
        raise ConfigError(
            f"variant must be 'structured' or 'mean_field', got {variant!r}")
    return variant


def cmd_fit(args) -> int:
    cfg = _load_config(args.config)
    base = Path(args.config).parent
    model = _build_model(cfg, base)
    fit_cfg = _fit_config(cfg, args)
    variant = _variant(cfg, args)
    out = _out_dir(args)

    try:
        rep = (fit if variant == "structured" else fit_mean_field)(model, fit_cfg)
    except DivergenceError as e:
        snap = out / "divergence_snapshot.json"
        with open(snap, "w") as fh:
            json.dump({"step": e.step, "params": e.params}, fh, indent=2)
        print(f"error: {e} (snapshot: {snap})", file=sys.stderr)
        return 3

    q = rep.final_params
    std = np.sqrt(family.marginal_variances(q))
    _write_csv(out / "posterior.csv", "t,mu,marginal_std",
               [(t, q.mu[t], std[t]) for t in range(q.T)])
    steps = rep.elbo_trace[:, 0].astype(int)
    _write_csv(out / "elbo_trace.csv", "step,elbo_smoothed,elbo_raw,seconds",
               [(int(steps[i]), rep.elbo_trace[i, 1], rep.elbo_raw[i],
                 rep.step_seconds[i]) for i in range(rep.steps_run)])
    with open(out / "fit_report.json", "w") as fh:
        json.dump({
            "model": cfg["model"],
            "variant": variant,
            "seed": rep.seed,
            "steps_run": rep.steps_run,
            "converged": rep.converged,
            "final_elbo": rep.final_elbo,
            "wall_clock_per_step": rep.wall_clock_per_step,
            "final_params": family.to_record(q),
        }, fh, indent=2)

    report.save_elbo_figure(steps, rep.elbo_trace[:, 1], rep.elbo_raw,
                            out / "elbo_trace.png")
    report.save_posterior_figure(q.mu, std, out / "posterior.png",
                                 observations=getattr(model, "x", None),
                                 mask=getattr(model, "mask", None))
    print(f"fit finished: {rep.steps_run} steps, final ELBO {_fmt(rep.final_elbo)}")
    return 0


def _read_posterior_csv(path: Path):
    if not path.exists():
        raise ConfigError(f"fitted posterior file not found: {path}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 3:
        raise ConfigError(f"{path} must have columns t,mu,marginal_std")
    return data[:, 1], data[:, 2]


def cmd_oracle_check(args) -> int:
    cfg = _load_config(args.config)
    base = Path(args.config).parent
    name, hyper = _model_hyper(cfg)
    if name != "wiener_gaussian":
        print("error: oracle requires wiener_gaussian", file=sys.stderr)
        return 2
    x = _load_observations(cfg, base)
    out = _out_dir(args)

    post = smoother.exact_posterior(hyper["sigma0"], hyper["sigma"],
                                    hyper["tau"], x)
    std = np.sqrt(smoother.posterior_marginal_variances(post))
    _write_csv(out / "oracle.csv", "t,exact_mean,exact_std",
               [(t, post.mean[t], std[t]) for t in range(post.T)])

    fitted_mu = fitted_std = None
    fitted_path = args.posterior if args.posterior is not None \
        else cfg.get("posterior_csv")
    if fitted_path is not None:
        fitted_mu, fitted_std = _read_posterior_csv(Path(fitted_path))
        if fitted_mu.size != post.T:
            raise ConfigError(
                f"fitted posterior has {fitted_mu.size} rows, expected {post.T}")
        mean_gap = fitted_mu - post.mean
        std_gap = fitted_std - std
        _write_csv(out / "gap.csv", "t,mean_gap,std_gap",
                   [(t, mean_gap[t], std_gap[t]) for t in range(post.T)])
        print(f"L_inf mean gap: {_fmt(np.max(np.abs(mean_gap)))}")
        print(f"L_inf std gap: {_fmt(np.max(np.abs(std_gap)))}")

    report.save_oracle_figure(post.mean, std, out / "oracle.png",
                              fitted_mean=fitted_mu, fitted_std=fitted_std)
    return 0


def cmd_benchmark(args) -> int:
    cfg = _load_config(args.config)
    name, hyper = _model_hyper(cfg)
    Ts = cfg.get("Ts")
    if not Ts or not all(isinstance(t, int) and t >= 1 for t in Ts):
        raise ConfigError("config must provide 'Ts': a list of positive integers")
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    S = args.samples if args.samples is not None else int(cfg.get("S", 1))
    reps = int(cfg.get("reps", 20))
    try:
        fit_cfg = FitConfig(seed=seed, S=S)
    except ValueError as e:
        raise ConfigError(str(e))
    out = _out_dir(args)

    def model_family(T):
        x, _ = models.simulate_observations(name, T, seed, hyper)
        return models.MODEL_BUILDERS[name](x, **hyper)

    rows = training.benchmark_scaling(model_family, sorted(Ts), fit_cfg, reps=reps)
    _write_csv(out / "scaling.csv", "T,variant,median_seconds_per_step",
               [(r["T"], r["variant"], r["median_seconds_per_step"]) for r in rows])

    slopes = {}
    for variant in ("linear", "dense"):
        pts = [(r["T"], r["median_seconds_per_step"])
               for r in rows if r["variant"] == variant]
        if len(pts) >= 2:
            slopes[variant] = training.loglog_slope(*zip(*pts))
            print(f"{variant} log-log slope: {_fmt(slopes[variant])}")
    report.save_scaling_figure(rows, out / "scaling.png", slopes=slopes)
    return 0


def _load_params(cfg: dict, base: Path):
    record = cfg.get("params")
    if record is None:
        path = cfg.get("params_file")
        if path is None:
            raise ConfigError("config must provide 'params' or 'params_file'")
        path = Path(path)
        if not path.is_absolute():
            path = base / path
        if not path.exists():
            raise ConfigError(f"params file not found: {path}")
        with open(path) as fh:
            record = json.load(fh)
        if "final_params" in record:  # accept a fit_report.json directly
            record = record["final_params"]
    try:
        return family.from_record(record)
    except ValueError as e:
        raise ConfigError(str(e))


def cmd_sample(args) -> int:
    cfg = _load_config(args.config)
    base = Path(args.config).parent
    q = _load_params(cfg, base)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    S = args.samples if args.samples is not None else int(cfg.get("S", 100))
    if S < 1:
        raise ConfigError("number of samples must be >= 1")
    out = _out_dir(args)

    batch = sample_batch(q, seed, S)
    rows = [(draw.stream_id, t, z[t]) for draw, z in batch for t in range(q.T)]
    _write_csv(out / "samples.csv", "sample,t,z", rows)
    report.save_samples_figure(np.stack([z for _, z in batch]), q.mu,
                               out / "samples.png")
    print(f"wrote {S} samples of length {q.T}")
    return 0


def _add_common(parser):
    parser.add_argument("--config", metavar="PATH", help="JSON configuration file")
    parser.add_argument("--seed", type=int, metavar="INT")
    parser.add_argument("--out", metavar="DIR", help="output directory (default .)")
    parser.add_argument("--samples", type=int, metavar="INT",
                        help="samples per gradient step / draw count")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="structvi",
        description="Structured black-box variational inference for latent "
                    "time series models.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="train a variational posterior")
    _add_common(p_fit)
    p_fit.add_argument("--variant", choices=("structured", "mean_field"))
    p_fit.add_argument("--steps", type=int, metavar="INT")
    p_fit.add_argument("--lr", type=float, metavar="FLOAT")
    p_fit.set_defaults(func=cmd_fit)

    p_oracle = sub.add_parser("oracle-check",
                              help="exact smoother vs a fitted posterior")
    _add_common(p_oracle)
    p_oracle.add_argument("--posterior", metavar="PATH",
                          help="posterior.csv from a previous fit")
    p_oracle.set_defaults(func=cmd_oracle_check)

    p_bench = sub.add_parser("benchmark", help="gradient-step scaling study")
    _add_common(p_bench)
    p_bench.set_defaults(func=cmd_benchmark)

    p_sample = sub.add_parser("sample", help="draw from saved parameters")
    _add_common(p_sample)
    p_sample.set_defaults(func=cmd_sample)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
