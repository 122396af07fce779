"""Eight-schools hierarchical model in three parameterizations.

The model is ``mu ~ N(5, 3^2)``, ``tau ~ N+(0, 5^2)``,
``theta_i ~ N(mu, tau^2)``, ``y_i ~ N(theta_i, eta_i^2)``.  The positive
hyperparameter is handled on the log scale inside the target itself
(``u = log tau``, with the change-of-variables term), so every variant
has support over all of R^d:

centered
    posterior over (mu, u, theta_1..theta_N), d = N + 2
noncentered
    posterior over (mu, u, eps_1..eps_N) with theta = mu + tau * eps
    reconstructed in the likelihood
marginalized
    posterior over (mu, u) with theta integrated out exactly,
    ``y_i | mu, tau ~ N(mu, eta_i^2 + tau^2)``, plus the exact
    precision-weighted conditional for recovering theta

All three are unnormalized posteriors.  Benchmark moments come from a
dense 2-D quadrature grid over (mu, u) combined with exact conditional
Gaussian algebra for theta/eps; benchmark samples are importance
resamples of the grid with exact conditional draws.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from ..errors import InvalidData, InvalidParameter, ParseError
from ..linalg import PDMatrix
from .base import BenchmarkMoments, SymmetryMeta, Target

__all__ = [
    "SchoolsData",
    "ingest_schools_data",
    "default_schools_data",
    "make_schools",
    "conditional_theta",
    "SCHOOLS_VARIANTS",
]

SCHOOLS_VARIANTS = ("centered", "noncentered", "marginalized")

# Priors: mu ~ N(MU_LOC, MU_SCALE^2), tau ~ N+(0, TAU_SCALE^2).
MU_LOC = 5.0
MU_SCALE = 3.0
TAU_SCALE = 5.0

# Quadrature grid over (mu, u = log tau).  The prior scales dominate the
# posterior extent, so fixed ranges suffice for any desk-scale dataset.
GRID_MU = (-15.0, 30.0, 401)
GRID_U = (-6.0, 4.0, 401)

LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class SchoolsData:
    y: NDArray
    eta: NDArray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).reshape(-1)
        eta = np.asarray(self.eta, dtype=float).reshape(-1)
        if y.size == 0:
            raise InvalidData("schools data is empty")
        if y.shape != eta.shape:
            raise InvalidData("y and eta must have the same length")
        if np.any(eta <= 0):
            raise InvalidData("all standard errors eta must be positive")
        y.setflags(write=False)
        eta.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "eta", eta)

    @property
    def n_schools(self) -> int:
        return self.y.shape[0]


def ingest_schools_data(path) -> SchoolsData:
    """Parse a schools CSV with header ``y,eta``, one row per school."""
    path = Path(path)
    ys, etas = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InvalidData(f"{path}: file is empty") from None
        if [h.strip().lower() for h in header] != ["y", "eta"]:
            raise ParseError(f"{path}:1: expected header 'y,eta', got {','.join(header)!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 2:
                raise ParseError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            try:
                ys.append(float(row[0]))
                etas.append(float(row[1]))
            except ValueError:
                raise ParseError(f"{path}:{lineno}: could not parse row {row!r}") from None
    if not ys:
        raise InvalidData(f"{path}: no data rows")
    return SchoolsData(np.array(ys), np.array(etas))


def default_schools_data() -> SchoolsData:
    """The bundled eight-schools dataset (canonical educational-testing
    data from the literature; shipped as a fixture, not derived here)."""
    ref = resources.files("symvi").joinpath("data/eight_schools.csv")
    with resources.as_file(ref) as path:
        return ingest_schools_data(path)


def _log_prior_mu_u(mu, u):
    """log p(mu) + log p(tau) + log|d tau/d u| at tau = exp(u).

    The half-normal is the N(0, TAU_SCALE^2) density restricted to tau>0
    (hence +log 2); the Jacobian of tau = e^u contributes +u.
    """
    tau2 = np.exp(2.0 * u)
    lp_mu = -0.5 * (mu - MU_LOC) ** 2 / MU_SCALE**2 - 0.5 * LOG_2PI - np.log(MU_SCALE)
    lp_tau = (
        np.log(2.0)
        - 0.5 * tau2 / TAU_SCALE**2
        - 0.5 * LOG_2PI
        - np.log(TAU_SCALE)
        + u
    )
    return lp_mu + lp_tau


def conditional_theta(data: SchoolsData, mu, tau):
    """Exact posterior of theta_i given (mu, tau) and the data:
    precision-weighted mean and variance per school.

    Accepts scalars or arrays broadcastable against each other; returns
    arrays with a trailing school axis.
    """
    mu = np.asarray(mu, dtype=float)[..., None]
    tau = np.asarray(tau, dtype=float)[..., None]
    prec = 1.0 / data.eta**2 + 1.0 / tau**2
    mean = (data.y / data.eta**2 + mu / tau**2) / prec
    return mean, 1.0 / prec


class _PosteriorGrid:
    """Dense quadrature over (mu, u) shared by all three variants."""

    def __init__(self, data: SchoolsData):
        self.data = data
        mu_ax = np.linspace(*GRID_MU)
        u_ax = np.linspace(*GRID_U)
        self.mu_ax, self.u_ax = mu_ax, u_ax
        self.h_mu = mu_ax[1] - mu_ax[0]
        self.h_u = u_ax[1] - u_ax[0]
        MU, U = np.meshgrid(mu_ax, u_ax, indexing="ij")
        self.MU, self.U = MU, U
        lp = _log_prior_mu_u(MU, U)
        v = data.eta[None, None, :] ** 2 + np.exp(2.0 * U)[..., None]
        lp = lp + np.sum(
            -0.5 * np.log(2.0 * np.pi * v)
            - (data.y[None, None, :] - MU[..., None]) ** 2 / (2.0 * v),
            axis=-1,
        )
        w = np.exp(lp - lp.max())
        self.weights = w / w.sum()

    def _expect(self, values) -> float:
        return float(np.sum(self.weights * values))

    def moments_mu_u(self):
        mean = np.array([self._expect(self.MU), self._expect(self.U)])
        dm, du = self.MU - mean[0], self.U - mean[1]
        cov = np.array(
            [
                [self._expect(dm * dm), self._expect(dm * du)],
                [self._expect(dm * du), self._expect(du * du)],
            ]
        )
        return mean, cov

    def _conditional_latents(self, kind):
        """Per-grid-point conditional mean and variance of the latent
        block: theta for the centered variant, eps for the noncentered."""
        tau = np.exp(self.U)
        m, v = conditional_theta(self.data, self.MU, tau)
        if kind == "theta":
            return m, v
        # eps = (theta - mu) / tau, a linear map of theta given (mu, tau)
        return (m - self.MU[..., None]) / tau[..., None], v / tau[..., None] ** 2

    def moments_with_latents(self, kind):
        """Mean/cov of (mu, u, latent block) via the tower rule."""
        n = self.data.n_schools
        d = 2 + n
        cm, cv = self._conditional_latents(kind)
        mean = np.zeros(d)
        mean[0] = self._expect(self.MU)
        mean[1] = self._expect(self.U)
        for i in range(n):
            mean[2 + i] = self._expect(cm[..., i])
        cov = np.zeros((d, d))
        dm, du = self.MU - mean[0], self.U - mean[1]
        cov[0, 0] = self._expect(dm * dm)
        cov[0, 1] = cov[1, 0] = self._expect(dm * du)
        cov[1, 1] = self._expect(du * du)
        for i in range(n):
            di = cm[..., i] - mean[2 + i]
            cov[0, 2 + i] = cov[2 + i, 0] = self._expect(dm * di)
            cov[1, 2 + i] = cov[2 + i, 1] = self._expect(du * di)
            for j in range(i, n):
                dj = cm[..., j] - mean[2 + j]
                cij = self._expect(di * dj)
                if i == j:
                    cij += self._expect(cv[..., i])
                cov[2 + i, 2 + j] = cov[2 + j, 2 + i] = cij
        return mean, cov

    def sampler(self, kind):
        """Importance resampler: grid cells by posterior weight, jittered
        within the cell, with exact conditional draws of the latents."""
        flat_w = self.weights.ravel()
        mu_flat = self.MU.ravel()
        u_flat = self.U.ravel()

        def draw(rng, n):
            idx = rng.choice(flat_w.size, size=n, p=flat_w)
            mu = mu_flat[idx] + rng.uniform(-0.5, 0.5, size=n) * self.h_mu
            u = u_flat[idx] + rng.uniform(-0.5, 0.5, size=n) * self.h_u
            if kind == "none":
                return np.column_stack([mu, u])
            tau = np.exp(u)
            m, v = conditional_theta(self.data, mu, tau)
            if kind == "eps":
                m = (m - mu[:, None]) / tau[:, None]
                v = v / tau[:, None] ** 2
            latent = m + np.sqrt(v) * rng.standard_normal(m.shape)
            return np.column_stack([mu, u, latent])

        return draw


def _batch(z, dim):
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        return z[None, :], True
    return z, False


def _unbatch(out, squeeze):
    if not squeeze:
        return out
    return float(out[0]) if out.ndim == 1 else out[0]


def make_schools(data: SchoolsData, variant: str) -> Target:
    """Build one of the three schools posteriors; see the module docstring."""
    if variant not in SCHOOLS_VARIANTS:
        raise InvalidParameter(
            f"unknown schools variant {variant!r}; expected one of {SCHOOLS_VARIANTS}"
        )
    n = data.n_schools
    y, eta2 = data.y, data.eta**2
    grid = _PosteriorGrid(data)

    if variant == "centered":
        d = n + 2

        def log_density(z):
            zb, squeeze = _batch(z, d)
            mu, u, theta = zb[:, 0], zb[:, 1], zb[:, 2:]
            out = _log_prior_mu_u(mu, u)
            out = out - n * u - 0.5 * LOG_2PI * n
            out = out - 0.5 * np.exp(-2.0 * u) * np.sum((theta - mu[:, None]) ** 2, axis=1)
            out = out - np.sum(
                0.5 * np.log(2.0 * np.pi * eta2) + (y - theta) ** 2 / (2.0 * eta2), axis=1
            )
            return _unbatch(out, squeeze)

        def grad_log_density(z):
            zb, squeeze = _batch(z, d)
            mu, u, theta = zb[:, 0], zb[:, 1], zb[:, 2:]
            e = np.exp(-2.0 * u)
            dev = theta - mu[:, None]
            g_mu = -(mu - MU_LOC) / MU_SCALE**2 + e * np.sum(dev, axis=1)
            g_u = 1.0 - np.exp(2.0 * u) / TAU_SCALE**2 - n + e * np.sum(dev**2, axis=1)
            g_theta = -e[:, None] * dev + (y - theta) / eta2
            return _unbatch(np.column_stack([g_mu, g_u, g_theta]), squeeze)

        mean, cov = grid.moments_with_latents("theta")
        sampler = grid.sampler("theta")
        sigma = (0,) + tuple(range(2, d))
        even_point = mean[list(sigma)]
    elif variant == "noncentered":
        d = n + 2

        def log_density(z):
            zb, squeeze = _batch(z, d)
            mu, u, eps = zb[:, 0], zb[:, 1], zb[:, 2:]
            theta = mu[:, None] + np.exp(u)[:, None] * eps
            out = _log_prior_mu_u(mu, u)
            out = out - 0.5 * np.sum(eps**2, axis=1) - 0.5 * LOG_2PI * n
            out = out - np.sum(
                0.5 * np.log(2.0 * np.pi * eta2) + (y - theta) ** 2 / (2.0 * eta2), axis=1
            )
            return _unbatch(out, squeeze)

        def grad_log_density(z):
            zb, squeeze = _batch(z, d)
            mu, u, eps = zb[:, 0], zb[:, 1], zb[:, 2:]
            tau = np.exp(u)
            resid = (y - mu[:, None] - tau[:, None] * eps) / eta2
            g_mu = -(mu - MU_LOC) / MU_SCALE**2 + np.sum(resid, axis=1)
            g_u = (
                1.0
                - np.exp(2.0 * u) / TAU_SCALE**2
                + np.sum(resid * eps, axis=1) * tau
            )
            g_eps = -eps + resid * tau[:, None]
            return _unbatch(np.column_stack([g_mu, g_u, g_eps]), squeeze)

        mean, cov = grid.moments_with_latents("eps")
        sampler = grid.sampler("eps")
        sigma = (0,) + tuple(range(2, d))
        even_point = mean[list(sigma)]
    else:  # marginalized
        d = 2

        def log_density(z):
            zb, squeeze = _batch(z, d)
            mu, u = zb[:, 0], zb[:, 1]
            v = eta2[None, :] + np.exp(2.0 * u)[:, None]
            out = _log_prior_mu_u(mu, u) + np.sum(
                -0.5 * np.log(2.0 * np.pi * v) - (y - mu[:, None]) ** 2 / (2.0 * v),
                axis=1,
            )
            return _unbatch(out, squeeze)

        def grad_log_density(z):
            zb, squeeze = _batch(z, d)
            mu, u = zb[:, 0], zb[:, 1]
            tau2 = np.exp(2.0 * u)
            v = eta2[None, :] + tau2[:, None]
            dev = y - mu[:, None]
            g_mu = -(mu - MU_LOC) / MU_SCALE**2 + np.sum(dev / v, axis=1)
            g_u = (
                1.0
                - tau2 / TAU_SCALE**2
                - tau2 * np.sum(1.0 / v - dev**2 / v**2, axis=1)
            )
            return _unbatch(np.column_stack([g_mu, g_u]), squeeze)

        mean, cov = grid.moments_mu_u()
        sampler = grid.sampler("none")
        sigma = (0,)
        even_point = mean[[0]]

    return Target(
        name=f"schools:{variant}",
        dim=d,
        log_density=log_density,
        grad_log_density=grad_log_density,
        symmetry=SymmetryMeta(
            kind="partial_even",
            sigma_indices=sigma,
            even_point=even_point,
            exact=False,  # symmetry holds in the prior, not the posterior
        ),
        benchmark=BenchmarkMoments(mean=mean, cov=PDMatrix(cov), source="grid_quadrature"),
        sampler=sampler,
        normalized=False,
        log_concave=False,
    )
