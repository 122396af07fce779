"""Matplotlib renderings for the reproduce command.

Each renderer takes the in-memory experiment data and writes a PNG next
to the tidy CSVs.  Plots are deliberately plain: the CSVs are the data
of record, the figures are for eyeballing a run.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "render_funnel_fit",
    "render_student_fits",
    "render_skew_errors",
    "render_mean_errors",
    "render_asymmetry",
]

DIVERGENCE_COLORS = {
    "reverse_kl": "tab:blue",
    "renyi:0.5": "tab:orange",
    "forward_kl": "tab:green",
    "hellinger_sq": "tab:red",
    "total_variation": "tab:purple",
}


def _color(label):
    return DIVERGENCE_COLORS.get(label, "tab:gray")


def _ellipse(mean, cov, n_sd=2.0, n_pts=200):
    """Boundary of the n_sd-sigma ellipse of a 2-D Gaussian."""
    w, v = np.linalg.eigh(cov)
    angles = np.linspace(0, 2 * np.pi, n_pts)
    circle = np.column_stack([np.cos(angles), np.sin(angles)])
    return mean + n_sd * circle * np.sqrt(w) @ v.T


def render_funnel_fit(path, grid_tau, grid_theta, log_density, fit_mean, fit_cov):
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    levels = np.max(log_density) + np.array([-12, -8, -5, -3, -1.5, -0.5])
    ax.contour(grid_tau, grid_theta, log_density.T, levels=levels, cmap="viridis")
    ring = _ellipse(fit_mean, fit_cov)
    ax.plot(ring[:, 0], ring[:, 1], "k--", lw=1.8, label="fitted q (2 sd)")
    ax.plot(*fit_mean, "k+", ms=10)
    ax.set_xlabel(r"$\tau$")
    ax.set_ylabel(r"$\theta_1$")
    ax.set_title("Gaussian fit to the elliptical funnel (reverse KL)")
    ax.legend(loc="upper left", frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def render_student_fits(path, meanfield_rows, fullcov_rows, true_corr):
    """meanfield_rows: (divergence, nu1, nu2); fullcov_rows:
    (divergence, v1, v2, rho)."""
    fig, (ax1, ax2, ax3) = plt.subplots(1, 3, figsize=(11, 3.6))
    for label, nu1, nu2 in meanfield_rows:
        ax1.plot(nu1, nu2, "o", color=_color(label), label=label)
    ax1.axhline(0, color="0.8", lw=0.8)
    ax1.axvline(0, color="0.8", lw=0.8)
    ax1.set_xlabel(r"$\nu_1$")
    ax1.set_ylabel(r"$\nu_2$")
    ax1.set_title("factorized: fitted mean")
    ax1.legend(fontsize=7, frameon=False)

    labels = [r[0] for r in fullcov_rows]
    ax2.bar(range(len(labels)), [r[3] for r in fullcov_rows],
            color=[_color(l) for l in labels])
    ax2.axhline(true_corr, color="k", ls="--", lw=1, label="target correlation")
    ax2.set_xticks(range(len(labels)))
    ax2.set_xticklabels(labels, rotation=45, ha="right", fontsize=7)
    ax2.set_title("full covariance: fitted correlation")
    ax2.legend(fontsize=7, frameon=False)

    ax3.bar(range(len(labels)), [r[1] for r in fullcov_rows],
            color=[_color(l) for l in labels])
    ax3.set_xticks(range(len(labels)))
    ax3.set_xticklabels(labels, rotation=45, ha="right", fontsize=7)
    ax3.set_title("full covariance: fitted variance")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def render_skew_errors(path, rows):
    """rows: (kappa, divergence, mean_abs_error) aggregated over seeds."""
    fig, ax = plt.subplots(figsize=(5.5, 4))
    by_div = {}
    for kappa, div, err in rows:
        by_div.setdefault(div, []).append((kappa, err))
    for div, pts in sorted(by_div.items()):
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], "o-",
                color=_color(div), label=div)
    ax.set_xlabel(r"skewness $\kappa$")
    ax.set_ylabel("|fitted location - target mean|")
    ax.set_title("Laplace location fits to a skewed normal")
    ax.legend(fontsize=8, frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def render_mean_errors(path, rows):
    """rows: (target, coordinate, group, scaled_error)."""
    targets = sorted({r[0] for r in rows})
    fig, ax = plt.subplots(figsize=(6.5, 0.8 + 0.6 * len(targets)))
    for k, tgt in enumerate(targets):
        for _, coord, group, err in (r for r in rows if r[0] == tgt):
            color = "tab:blue" if group == "sigma" else "tab:red"
            ax.plot(max(err, 1e-6), k, "o", color=color, alpha=0.75, ms=5)
    ax.set_yticks(range(len(targets)))
    ax.set_yticklabels(targets, fontsize=8)
    ax.set_xscale("log")
    ax.set_xlabel("scaled mean error (log scale)")
    ax.plot([], [], "o", color="tab:blue", label="symmetric coordinates")
    ax.plot([], [], "o", color="tab:red", label="asymmetric coordinates")
    ax.legend(fontsize=8, frameon=False, loc="upper right")
    ax.set_title("VI mean errors by coordinate group")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def render_asymmetry(path, rows):
    """rows: (target, q90)."""
    labels = [r[0] for r in rows]
    values = [max(r[1], 1e-12) for r in rows]
    fig, ax = plt.subplots(figsize=(6, 3.6))
    ax.barh(range(len(labels)), values, color="tab:blue")
    ax.set_yticks(range(len(labels)))
    ax.set_yticklabels(labels, fontsize=8)
    ax.set_xscale("log")
    ax.set_xlabel(r"$\alpha_{90}$ (log scale)")
    ax.set_title("Reflection asymmetry by target")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)
