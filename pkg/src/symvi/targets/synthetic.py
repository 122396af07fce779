"""Synthetic target zoo: Gaussian, student-t, skew-normal, funnels, crescent.

All densities are normalized, vectorized over a batch axis, and carry an
exact generative sampler plus analytic benchmark moments.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import solve_triangular
from scipy.special import gammaln, log_ndtr

from ..errors import InvalidParameter
from ..linalg import PDMatrix, normalized_cov
from .base import BenchmarkMoments, SymmetryMeta, Target

__all__ = [
    "make_gaussian",
    "make_student_t",
    "make_skew_normal",
    "make_funnel",
    "make_extended_funnel",
    "make_crescent",
]

LOG_2PI = np.log(2.0 * np.pi)


def _batch(z, dim):
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        return z[None, :], True
    return z, False


def _unbatch(out, squeeze):
    if not squeeze:
        return out
    return float(out[0]) if out.ndim == 1 else out[0]


def make_gaussian(mean, cov) -> Target:
    """Multivariate normal target N(mean, cov)."""
    mean = np.asarray(mean, dtype=float).reshape(-1)
    cov_pd = PDMatrix(np.atleast_2d(cov))
    d = mean.shape[0]
    L = cov_pd.chol
    log_norm = -0.5 * d * LOG_2PI - 0.5 * cov_pd.logdet()

    def log_density(z):
        zb, squeeze = _batch(z, d)
        y = solve_triangular(L, (zb - mean).T, lower=True)
        return _unbatch(log_norm - 0.5 * np.sum(y * y, axis=0), squeeze)

    def grad_log_density(z):
        zb, squeeze = _batch(z, d)
        return _unbatch(-cov_pd.solve((zb - mean).T).T, squeeze)

    def sampler(rng, n):
        return mean + rng.standard_normal((n, d)) @ L.T

    return Target(
        name=f"gaussian(d={d})",
        dim=d,
        log_density=log_density,
        grad_log_density=grad_log_density,
        symmetry=SymmetryMeta(
            kind="full_elliptical",
            sigma_indices=tuple(range(d)),
            even_point=mean,
            normalized_cov_sigma=normalized_cov(cov_pd),
        ),
        benchmark=BenchmarkMoments(mean=mean, cov=cov_pd, source="analytic"),
        sampler=sampler,
        log_concave=True,
    )


def _make_multivariate_t(df: float, mean, scale) -> Target:
    mean = np.asarray(mean, dtype=float).reshape(-1)
    scale_pd = PDMatrix(np.atleast_2d(scale))
    d = mean.shape[0]
    L = scale_pd.chol
    log_norm = (
        gammaln((df + d) / 2.0)
        - gammaln(df / 2.0)
        - 0.5 * d * np.log(df * np.pi)
        - 0.5 * scale_pd.logdet()
    )

    def log_density(z):
        zb, squeeze = _batch(z, d)
        y = solve_triangular(L, (zb - mean).T, lower=True)
        m2 = np.sum(y * y, axis=0)
        return _unbatch(log_norm - 0.5 * (df + d) * np.log1p(m2 / df), squeeze)

    def grad_log_density(z):
        zb, squeeze = _batch(z, d)
        dev = zb - mean
        siginv_dev = scale_pd.solve(dev.T).T
        m2 = np.sum(dev * siginv_dev, axis=1)
        return _unbatch(-((df + d) / (df + m2))[:, None] * siginv_dev, squeeze)

    def sampler(rng, n):
        normal = rng.standard_normal((n, d)) @ L.T
        return mean + normal / np.sqrt(rng.chisquare(df, size=n) / df)[:, None]

    cov = PDMatrix(df / (df - 2.0) * scale_pd.entries)
    return Target(
        name=f"student_t(df={df:g}, d={d})",
        dim=d,
        log_density=log_density,
        grad_log_density=grad_log_density,
        symmetry=SymmetryMeta(
            kind="full_elliptical",
            sigma_indices=tuple(range(d)),
            even_point=mean,
            normalized_cov_sigma=normalized_cov(cov),
        ),
        benchmark=BenchmarkMoments(mean=mean, cov=cov, source="analytic"),
        sampler=sampler,
        log_concave=False,  # heavy tails: log-concave only near the mode
    )


def make_student_t(df: float, correlation: float) -> Target:
    """Bivariate student-t with unit scales and the given correlation.

    Requires df > 2 so the covariance (df/(df-2) times the scale matrix)
    is finite; the correlation matrix equals [[1, rho], [rho, 1]].
    """
    if df <= 2:
        raise InvalidParameter("df must exceed 2 for a finite covariance")
    if not -1.0 < correlation < 1.0:
        raise InvalidParameter("|correlation| must be < 1")
    scale = np.array([[1.0, correlation], [correlation, 1.0]])
    return _make_multivariate_t(df, np.zeros(2), scale)


def make_student_t_1d(df: float, location: float = 0.0, scale: float = 1.0) -> Target:
    """Univariate student-t; the 1-D member of the same constructor."""
    if df <= 2:
        raise InvalidParameter("df must exceed 2 for a finite covariance")
    if scale <= 0:
        raise InvalidParameter("scale must be positive")
    return _make_multivariate_t(df, np.array([location]), np.array([[scale**2]]))


def make_skew_normal(location: float, scale: float, kappa: float) -> Target:
    """1-D skew-normal with shape kappa; kappa = 0 reduces to
    N(location, scale^2).

    The benchmark mean is the closed form
    ``location + scale * delta * sqrt(2/pi)`` with
    ``delta = kappa / sqrt(1 + kappa^2)``.
    """
    if scale <= 0:
        raise InvalidParameter("scale must be positive")
    delta = kappa / np.sqrt(1.0 + kappa**2)
    mean = location + scale * delta * np.sqrt(2.0 / np.pi)
    var = scale**2 * (1.0 - 2.0 * delta**2 / np.pi)

    def log_density(z):
        zb, squeeze = _batch(z, 1)
        u = (zb[:, 0] - location) / scale
        out = (
            np.log(2.0)
            - np.log(scale)
            - 0.5 * LOG_2PI
            - 0.5 * u**2
            + log_ndtr(kappa * u)
        )
        return _unbatch(out, squeeze)

    def grad_log_density(z):
        zb, squeeze = _batch(z, 1)
        u = (zb[:, 0] - location) / scale
        # d/du log Phi(kappa u) = kappa * phi(kappa u) / Phi(kappa u)
        mills = np.exp(-0.5 * (kappa * u) ** 2 - 0.5 * LOG_2PI - log_ndtr(kappa * u))
        out = ((-u + kappa * mills) / scale)[:, None]
        return _unbatch(out, squeeze)

    def sampler(rng, n):
        z0 = rng.standard_normal(n)
        z1 = rng.standard_normal(n)
        u = delta * np.abs(z0) + np.sqrt(1.0 - delta**2) * z1
        return (location + scale * u)[:, None]

    if kappa == 0.0:
        symmetry = SymmetryMeta(
            kind="full_even", sigma_indices=(0,), even_point=np.array([location])
        )
    else:
        symmetry = SymmetryMeta(kind="asymmetric")
    return Target(
        name=f"skew_normal(kappa={kappa:g})",
        dim=1,
        log_density=log_density,
        grad_log_density=grad_log_density,
        symmetry=symmetry,
        benchmark=BenchmarkMoments(
            mean=np.array([mean]), cov=PDMatrix([[var]]), source="analytic"
        ),
        sampler=sampler,
        log_concave=True,
    )


def _check_correlation_matrix(c) -> PDMatrix:
    c = np.atleast_2d(np.asarray(c, dtype=float))
    if not np.allclose(np.diag(c), 1.0, atol=1e-12, rtol=0):
        raise InvalidParameter("correlation matrix must have a unit diagonal")
    return PDMatrix(c)


def make_funnel(n_theta: int, correlation_matrix) -> Target:
    """Hierarchical funnel: tau ~ N(0,1), theta | tau ~ N(0, e^{2 tau} C).

    Coordinates are ordered (tau, theta_1..theta_n).  The joint density is
    asymmetric in tau but elliptically symmetric along theta with a
    constant even point at 0 and conditional correlation C for every tau;
    tau and theta are uncorrelated and the marginal correlation of theta
    is again C.
    """
    if n_theta < 1:
        raise InvalidParameter("need at least one theta coordinate")
    C = _check_correlation_matrix(correlation_matrix)
    if C.dim != n_theta:
        raise InvalidParameter(f"correlation matrix dim {C.dim} != n_theta {n_theta}")
    d = 1 + n_theta
    Lc = C.chol
    log_norm = -0.5 * d * LOG_2PI - 0.5 * C.logdet()

    def _split(zb):
        return zb[:, 0], zb[:, 1:]

    def log_density(z):
        zb, squeeze = _batch(z, d)
        tau, theta = _split(zb)
        quad = np.sum(theta * C.solve(theta.T).T, axis=1)
        out = log_norm - 0.5 * tau**2 - n_theta * tau - 0.5 * np.exp(-2.0 * tau) * quad
        return _unbatch(out, squeeze)

    def grad_log_density(z):
        zb, squeeze = _batch(z, d)
        tau, theta = _split(zb)
        cinv_theta = C.solve(theta.T).T
        quad = np.sum(theta * cinv_theta, axis=1)
        e = np.exp(-2.0 * tau)
        g_tau = -tau - n_theta + e * quad
        g_theta = -e[:, None] * cinv_theta
        return _unbatch(np.column_stack([g_tau, g_theta]), squeeze)

    def sampler(rng, n):
        tau = rng.standard_normal(n)
        eps = rng.standard_normal((n, n_theta))
        theta = np.exp(tau)[:, None] * (eps @ Lc.T)
        return np.column_stack([tau, theta])

    # Marginal moments: Var(tau)=1, Cov(tau, theta)=0,
    # Cov(theta) = E[e^{2 tau}] C = e^2 C.
    cov = np.zeros((d, d))
    cov[0, 0] = 1.0
    cov[1:, 1:] = np.exp(2.0) * C.entries
    return Target(
        name=f"funnel(n={n_theta})",
        dim=d,
        log_density=log_density,
        grad_log_density=grad_log_density,
        symmetry=SymmetryMeta(
            kind="partial_elliptical",
            sigma_indices=tuple(range(1, d)),
            even_point=np.zeros(n_theta),
            normalized_cov_sigma=C,
        ),
        benchmark=BenchmarkMoments(mean=np.zeros(d), cov=PDMatrix(cov), source="analytic"),
        sampler=sampler,
        log_concave=False,
    )


def make_extended_funnel(n_theta: int, c12: float) -> Target:
    """Funnel with a varying mean: mu ~ N(0,1), tau ~ N(0,1),
    theta | mu, tau ~ N(mu * 1, e^{2 tau} C) with C_12 = c12.

    Coordinates are ordered (mu, tau, theta_1..theta_n).  The density is
    even symmetric along (mu, theta) with a constant even point at 0; the
    conditional normalized covariance of (mu, theta) varies with tau, so
    no constant elliptical matrix is recorded.
    """
    if n_theta < 1:
        raise InvalidParameter("need at least one theta coordinate")
    if not -1.0 < c12 < 1.0:
        raise InvalidParameter("|c12| must be < 1")
    C_entries = np.eye(n_theta)
    if n_theta >= 2:
        C_entries[0, 1] = C_entries[1, 0] = c12
    C = PDMatrix(C_entries)
    d = 2 + n_theta
    Lc = C.chol
    log_norm = -0.5 * d * LOG_2PI - 0.5 * C.logdet()

    def log_density(z):
        zb, squeeze = _batch(z, d)
        mu, tau, theta = zb[:, 0], zb[:, 1], zb[:, 2:]
        dev = theta - mu[:, None]
        quad = np.sum(dev * C.solve(dev.T).T, axis=1)
        out = (
            log_norm
            - 0.5 * mu**2
            - 0.5 * tau**2
            - n_theta * tau
            - 0.5 * np.exp(-2.0 * tau) * quad
        )
        return _unbatch(out, squeeze)

    def grad_log_density(z):
        zb, squeeze = _batch(z, d)
        mu, tau, theta = zb[:, 0], zb[:, 1], zb[:, 2:]
        dev = theta - mu[:, None]
        cinv_dev = C.solve(dev.T).T
        quad = np.sum(dev * cinv_dev, axis=1)
        e = np.exp(-2.0 * tau)
        g_mu = -mu + e * np.sum(cinv_dev, axis=1)
        g_tau = -tau - n_theta + e * quad
        g_theta = -e[:, None] * cinv_dev
        return _unbatch(np.column_stack([g_mu, g_tau, g_theta]), squeeze)

    def sampler(rng, n):
        mu = rng.standard_normal(n)
        tau = rng.standard_normal(n)
        eps = rng.standard_normal((n, n_theta))
        theta = mu[:, None] + np.exp(tau)[:, None] * (eps @ Lc.T)
        return np.column_stack([mu, tau, theta])

    # Cov(mu, theta_i) = Var(mu) = 1; Cov(theta) = e^2 C + 1 1^T.
    cov = np.zeros((d, d))
    cov[0, 0] = 1.0
    cov[1, 1] = 1.0
    cov[0, 2:] = cov[2:, 0] = 1.0
    cov[2:, 2:] = np.exp(2.0) * C.entries + 1.0
    sigma = (0,) + tuple(range(2, d))
    return Target(
        name=f"extended_funnel(n={n_theta}, c12={c12:g})",
        dim=d,
        log_density=log_density,
        grad_log_density=grad_log_density,
        symmetry=SymmetryMeta(
            kind="partial_even",
            sigma_indices=sigma,
            even_point=np.zeros(1 + n_theta),
        ),
        benchmark=BenchmarkMoments(mean=np.zeros(d), cov=PDMatrix(cov), source="analytic"),
        sampler=sampler,
        log_concave=False,
    )


CRESCENT_A = 0.03
CRESCENT_B = 100.0
CRESCENT_C = 0.02
CRESCENT_SIGMA = 100.0 * np.array([[1.0, 0.5], [0.5, 1.0]])


def make_crescent() -> Target:
    """Elliptical Rosenbrock ("crescent") distribution, d = 3.

    ``x ~ N(0, Sigma)`` in the plane and ``y | x ~ N(a (||x||^2_{Sigma^-1}
    - b), c^2)`` with a = 0.03, b = 100, c = 0.02 and Sigma = 10^2 [[1,
    0.5], [0.5, 1]].  The conditional mean is the squared Mahalanobis
    radius of x, so the third coordinate depends quadratically on the
    first two; the density is elliptically symmetric along x with even
    point 0.

    Since ``||x||^2_{Sigma^-1} ~ chi^2_2``, the benchmark moments are
    analytic: E[y] = a (2 - b), Var(y) = c^2 + 4 a^2, Cov(x, y) = 0.
    """
    sigma = PDMatrix(CRESCENT_SIGMA)
    a, b, c = CRESCENT_A, CRESCENT_B, CRESCENT_C
    d = 3
    Ls = sigma.chol
    log_norm = -LOG_2PI - 0.5 * sigma.logdet() - 0.5 * np.log(2.0 * np.pi * c**2)

    def _parts(zb):
        x, y = zb[:, :2], zb[:, 2]
        siginv_x = sigma.solve(x.T).T
        r2 = np.sum(x * siginv_x, axis=1)
        return x, y, siginv_x, r2

    def log_density(z):
        zb, squeeze = _batch(z, d)
        _, y, _, r2 = _parts(zb)
        m = a * (r2 - b)
        out = log_norm - 0.5 * r2 - 0.5 * (y - m) ** 2 / c**2
        return _unbatch(out, squeeze)

    def grad_log_density(z):
        zb, squeeze = _batch(z, d)
        _, y, siginv_x, r2 = _parts(zb)
        m = a * (r2 - b)
        resid = (y - m) / c**2
        g_x = -siginv_x + (2.0 * a * resid)[:, None] * siginv_x
        g_y = -resid
        return _unbatch(np.column_stack([g_x, g_y]), squeeze)

    def sampler(rng, n):
        x = rng.standard_normal((n, 2)) @ Ls.T
        r2 = np.sum(x * sigma.solve(x.T).T, axis=1)
        y = a * (r2 - b) + c * rng.standard_normal(n)
        return np.column_stack([x, y])

    cov = np.zeros((d, d))
    cov[:2, :2] = sigma.entries
    cov[2, 2] = c**2 + a**2 * 4.0  # Var(chi^2_2) = 4
    mean = np.array([0.0, 0.0, a * (2.0 - b)])
    return Target(
        name="crescent",
        dim=d,
        log_density=log_density,
        grad_log_density=grad_log_density,
        symmetry=SymmetryMeta(
            kind="partial_elliptical",
            sigma_indices=(0, 1),
            even_point=np.zeros(2),
            normalized_cov_sigma=normalized_cov(sigma),
        ),
        benchmark=BenchmarkMoments(mean=mean, cov=PDMatrix(cov), source="analytic"),
        sampler=sampler,
        log_concave=False,
    )
