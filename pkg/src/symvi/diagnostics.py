"""Symmetry and accuracy diagnostics.

The reflection-asymmetry statistic evaluates, for benchmark samples z,
``alpha(z) = |log p~(z) - log p~(z')|`` where z' is the reflection of z
about an estimated mean.  For an exactly even-symmetric density the
statistic vanishes identically; its 90th percentile summarizes how far a
target is from even symmetry.  Accuracy reports compare fitted
variational moments against benchmark moments, scaled per coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import EmptyInput, InvalidParameter, MissingBenchmark
from .linalg import correlation_of
from .targets.base import Target

__all__ = [
    "AsymmetryReport",
    "AccuracyReport",
    "asymmetry",
    "accuracy",
    "quantile",
]

REFLECTIONS = ("point", "literal")


def quantile(values, q: float) -> float:
    """Empirical quantile with linear interpolation between order
    statistics; monotone in q, with q=0 the minimum and q=1 the maximum."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise EmptyInput("quantile of an empty collection")
    if not 0.0 <= q <= 1.0:
        raise InvalidParameter("quantile level must lie in [0, 1]")
    return float(np.quantile(values, q, method="linear"))


@dataclass(frozen=True)
class AsymmetryReport:
    """Per-sample reflection asymmetries and their 90th percentile.

    ``n_excluded`` counts samples whose reflected point had a non-finite
    log-density; those are dropped from the quantile (and reported, since
    they signal exactly the kind of instability that breaks the
    diagnostic on badly-scaled models).
    """

    alpha_values: NDArray
    q90: float
    n: int
    mean_hat: NDArray
    reflection: str
    n_excluded: int = 0

    def summary_dict(self) -> dict:
        return {
            "q90": self.q90,
            "n": self.n,
            "n_excluded": self.n_excluded,
            "reflection": self.reflection,
            "mean_hat": np.asarray(self.mean_hat).tolist(),
        }


def asymmetry(target: Target, samples, mean_hat, reflection: str = "point") -> AsymmetryReport:
    """Reflection-asymmetry statistic over benchmark samples.

    ``reflection="point"`` uses the true point reflection z' = 2 mean_hat
    - z (even symmetry about mean_hat maps z = mean_hat + w to mean_hat -
    w); ``"literal"`` uses z' = mean_hat - z, kept for comparison with
    the formula as sometimes written.  Normalizing constants cancel in
    the difference, so unnormalized targets are fine.
    """
    if reflection not in REFLECTIONS:
        raise InvalidParameter(f"reflection must be one of {REFLECTIONS}")
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[1] != target.dim:
        raise InvalidParameter(f"samples must have shape (n, {target.dim})")
    n = samples.shape[0]
    if n < 100:
        raise InvalidParameter("need at least 100 samples for a stable quantile")
    mean_hat = np.asarray(mean_hat, dtype=float)
    if mean_hat.shape != (target.dim,):
        raise InvalidParameter(f"mean_hat must have shape ({target.dim},)")
    if reflection == "point":
        reflected = 2.0 * mean_hat - samples
    else:
        reflected = mean_hat - samples
    lp = np.asarray(target.log_density(samples), dtype=float)
    lp_ref = np.asarray(target.log_density(reflected), dtype=float)
    finite = np.isfinite(lp) & np.isfinite(lp_ref)
    alpha = np.abs(lp[finite] - lp_ref[finite])
    if alpha.size == 0:
        raise EmptyInput("all reflected samples had non-finite log-density")
    return AsymmetryReport(
        alpha_values=alpha,
        q90=quantile(alpha, 0.9),
        n=n,
        mean_hat=mean_hat,
        reflection=reflection,
        n_excluded=int(n - alpha.size),
    )


@dataclass(frozen=True)
class AccuracyReport:
    """Scaled mean errors per coordinate and correlation errors per pair,
    each tagged with its symmetry group ("sigma", "sigmabar", or "cross"
    for mixed pairs)."""

    mean_rows: tuple[tuple[int, str, float], ...]
    corr_rows: tuple[tuple[int, int, str, float], ...]

    def max_mean_error(self, group: str | None = None) -> float:
        errs = [e for _, g, e in self.mean_rows if group is None or g == group]
        if not errs:
            raise EmptyInput(f"no coordinates in group {group!r}")
        return max(errs)

    def max_corr_error(self, group: str | None = None) -> float:
        errs = [e for _, _, g, e in self.corr_rows if group is None or g == group]
        if not errs:
            raise EmptyInput(f"no pairs in group {group!r}")
        return max(errs)

    def summary_dict(self) -> dict:
        out = {"max_mean_error": self.max_mean_error()}
        groups = {g for _, g, _ in self.mean_rows}
        for g in sorted(groups):
            out[f"max_mean_error_{g}"] = self.max_mean_error(g)
        if self.corr_rows:
            out["max_corr_error"] = self.max_corr_error()
        return out


def accuracy(fit, target: Target) -> AccuracyReport:
    """Accuracy of a fit against the target's benchmark moments.

    Mean errors are |nu_i - mean_i| / std_i per coordinate; correlation
    errors are |Corr_q(i,j) - Corr_p(i,j)| per pair, with the fitted
    correlation taken from the scale matrix L L^T.  ``fit`` may be a
    FitResult or bare family parameters.
    """
    if target.benchmark is None:
        raise MissingBenchmark(f"target {target.name!r} has no benchmark moments")
    params = getattr(fit, "params", fit)
    bench = target.benchmark
    sd = bench.std()
    nu = np.asarray(params.nu, dtype=float)
    corr_q = correlation_of(params.cov()).entries
    corr_p = correlation_of(bench.cov).entries
    sigma = set(target.symmetry.sigma_indices)

    def coord_group(i):
        return "sigma" if i in sigma else "sigmabar"

    mean_rows = tuple(
        (i, coord_group(i), float(abs(nu[i] - bench.mean[i]) / sd[i]))
        for i in range(target.dim)
    )
    corr_rows = []
    for i in range(target.dim):
        for j in range(i + 1, target.dim):
            gi, gj = coord_group(i), coord_group(j)
            group = gi if gi == gj else "cross"
            corr_rows.append((i, j, group, float(abs(corr_q[i, j] - corr_p[i, j]))))
    return AccuracyReport(mean_rows=mean_rows, corr_rows=tuple(corr_rows))
