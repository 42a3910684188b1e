"""Figure rendering for CLI reports.

Every CSV the CLI writes gets a companion PNG next to it. Rendering is
headless (Agg) and file-based; nothing here opens a window.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

DPI = 150


def _new_axes(width=6.0, height=3.6):
    fig, ax = plt.subplots(figsize=(width, height))
    ax.grid(alpha=0.3)
    return fig, ax


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)


def save_elbo_figure(steps, smoothed, raw, path):
    fig, ax = _new_axes()
    ax.plot(steps, raw, color="0.8", lw=0.6, label="per-step estimate")
    ax.plot(steps, smoothed, color="C3", lw=1.5, label="smoothed")
    ax.set_xlabel("step")
    ax.set_ylabel("ELBO")
    ax.legend(loc="lower right", fontsize=8)
    _finish(fig, path)


def save_posterior_figure(mu, std, path, observations=None, mask=None):
    t = np.arange(len(mu))
    fig, ax = _new_axes()
    ax.fill_between(t, mu - 2 * std, mu + 2 * std, color="C0", alpha=0.25,
                    label="mean ± 2 std")
    ax.plot(t, mu, color="C0", lw=1.5, label="posterior mean")
    if observations is not None:
        obs = np.asarray(observations, dtype=float)
        keep = np.ones(len(obs), dtype=bool) if mask is None else np.asarray(mask, bool)
        ax.plot(t[keep], obs[keep], "k.", ms=4, label="observations")
    ax.set_xlabel("t")
    ax.set_ylabel("z")
    ax.legend(loc="best", fontsize=8)
    _finish(fig, path)


def save_oracle_figure(exact_mean, exact_std, path, fitted_mean=None,
                       fitted_std=None):
    t = np.arange(len(exact_mean))
    fig, ax = _new_axes()
    ax.fill_between(t, exact_mean - 2 * exact_std, exact_mean + 2 * exact_std,
                    color="C2", alpha=0.2, label="exact ± 2 std")
    ax.plot(t, exact_mean, color="C2", lw=1.5, label="exact mean")
    if fitted_mean is not None:
        ax.plot(t, fitted_mean, "C3--", lw=1.2, label="fitted mean")
        if fitted_std is not None:
            ax.plot(t, fitted_mean + 2 * fitted_std, "C3:", lw=0.8)
            ax.plot(t, fitted_mean - 2 * fitted_std, "C3:", lw=0.8)
    ax.set_xlabel("t")
    ax.set_ylabel("z")
    ax.legend(loc="best", fontsize=8)
    _finish(fig, path)


def save_scaling_figure(rows, path, slopes=None):
    fig, ax = _new_axes(width=5.0, height=3.8)
    variants = sorted({r["variant"] for r in rows})
    for i, variant in enumerate(variants):
        pts = [(r["T"], r["median_seconds_per_step"])
               for r in rows if r["variant"] == variant]
        Ts, ts = zip(*sorted(pts))
        label = variant
        if slopes and variant in slopes:
            label = f"{variant} (slope {slopes[variant]:.2f})"
        ax.loglog(Ts, ts, "o-", color=f"C{i}", label=label)
    ax.set_xlabel("T")
    ax.set_ylabel("seconds per gradient step")
    ax.legend(loc="best", fontsize=8)
    _finish(fig, path)


def save_samples_figure(samples, mu, path):
    t = np.arange(samples.shape[1])
    fig, ax = _new_axes()
    for row in samples[:50]:
        ax.plot(t, row, color="C0", alpha=0.15, lw=0.7)
    ax.plot(t, mu, color="C3", lw=1.5, label="mean")
    ax.set_xlabel("t")
    ax.set_ylabel("z")
    ax.legend(loc="best", fontsize=8)
    _finish(fig, path)
