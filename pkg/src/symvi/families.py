"""Location and location-scale variational families.

A family member is a pair (nu, L) acting on a spherically symmetric base
density q0: samples are ``z = nu + L @ zeta`` with ``zeta ~ q0``, and the
log-density is ``log q0(L^-1 (z - nu)) - sum(log diag L)``.  The scale
matrix is ``S = L @ L.T``; only S is identified, the factor L is an
implementation detail of the optimizer.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import solve_triangular
from scipy.special import gammaln
from scipy.stats import chi as chi_dist
from scipy.stats import f as f_dist
from scipy.stats import gamma as gamma_dist

from .errors import DimensionMismatch, InvalidParameter, ScaleFrozen

__all__ = [
    "BaseDensity",
    "LocationScaleParams",
    "LocationFamily",
    "standard_normal",
    "standard_laplace",
    "standard_student_t",
    "freeze_scale",
]

DEFAULT_STUDENT_DF = 5.0


@dataclass(frozen=True)
class BaseDensity:
    """Spherically symmetric base density over R^dim.

    Kinds
    -----
    ``"normal"``
        Standard multivariate normal.
    ``"laplace"``
        The isotropic density with ``log q0(zeta) = const - ||zeta||``
        (not a product of 1-D Laplaces, so spherical symmetry holds in
        any dimension; the two coincide for dim = 1).
    ``"student_t"``
        Standard multivariate student-t with ``df`` degrees of freedom.
    """

    kind: str
    dim: int
    df: float | None = None

    def __post_init__(self):
        if self.kind not in ("normal", "laplace", "student_t"):
            raise InvalidParameter(f"unknown base density kind {self.kind!r}")
        if self.dim < 1:
            raise InvalidParameter("dim must be a positive integer")
        if self.kind == "student_t":
            df = DEFAULT_STUDENT_DF if self.df is None else float(self.df)
            if df <= 0:
                raise InvalidParameter("student-t df must be positive")
            object.__setattr__(self, "df", df)
        elif self.df is not None:
            raise InvalidParameter(f"df is only meaningful for student_t, got kind {self.kind!r}")

    # -- radial profile ------------------------------------------------

    def _log_radial(self, r: NDArray) -> NDArray:
        d = self.dim
        if self.kind == "normal":
            return -0.5 * d * np.log(2 * np.pi) - 0.5 * r**2
        if self.kind == "laplace":
            # Normalizer of exp(-||zeta||) over R^d:
            # 2 pi^{d/2} Gamma(d) / Gamma(d/2).
            log_norm = np.log(2.0) + 0.5 * d * np.log(np.pi) + gammaln(d) - gammaln(d / 2.0)
            return -log_norm - r
        df = self.df
        return (
            gammaln((df + d) / 2.0)
            - gammaln(df / 2.0)
            - 0.5 * d * np.log(df * np.pi)
            - 0.5 * (df + d) * np.log1p(r**2 / df)
        )

    def _radial_slope_over_r(self, r: NDArray) -> NDArray:
        """(d/dr log q0)(r) / r, the isotropic gradient multiplier."""
        if self.kind == "normal":
            return -np.ones_like(r)
        if self.kind == "laplace":
            with np.errstate(divide="ignore"):
                out = -1.0 / r
            return np.where(r > 0, out, 0.0)
        return -(self.df + self.dim) / (self.df + r**2)

    # -- public surface --------------------------------------------------

    def log_density(self, zeta: NDArray) -> float | NDArray:
        zeta, squeeze = _as_batch(zeta, self.dim)
        out = self._log_radial(np.linalg.norm(zeta, axis=1))
        return float(out[0]) if squeeze else out

    def grad_log_density(self, zeta: NDArray) -> NDArray:
        zeta, squeeze = _as_batch(zeta, self.dim)
        r = np.linalg.norm(zeta, axis=1)
        out = self._radial_slope_over_r(r)[:, None] * zeta
        return out[0] if squeeze else out

    def sample(self, rng: np.random.Generator, n: int) -> NDArray:
        if self.kind == "normal":
            return rng.standard_normal((n, self.dim))
        if self.kind == "laplace":
            # Radius ~ Gamma(d, 1) (radial density r^{d-1} e^{-r}),
            # direction uniform on the sphere.
            direction = rng.standard_normal((n, self.dim))
            direction /= np.linalg.norm(direction, axis=1, keepdims=True)
            return direction * rng.gamma(self.dim, 1.0, size=n)[:, None]
        normal = rng.standard_normal((n, self.dim))
        return normal / np.sqrt(rng.chisquare(self.df, size=n) / self.df)[:, None]

    def radial_cdf(self, r: NDArray) -> NDArray:
        """CDF of ||zeta||; used by sampling-consistency checks."""
        r = np.asarray(r, dtype=float)
        if self.kind == "normal":
            return chi_dist.cdf(r, df=self.dim)
        if self.kind == "laplace":
            return gamma_dist.cdf(r, a=self.dim)
        return f_dist.cdf(r**2 / self.dim, self.dim, self.df)


def standard_normal(dim: int) -> BaseDensity:
    return BaseDensity("normal", dim)


def standard_laplace(dim: int) -> BaseDensity:
    return BaseDensity("laplace", dim)


def standard_student_t(dim: int, df: float = DEFAULT_STUDENT_DF) -> BaseDensity:
    return BaseDensity("student_t", dim, df)


def _as_batch(z, dim):
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        if z.shape[0] != dim:
            raise DimensionMismatch(f"expected vectors of length {dim}, got {z.shape}")
        return z[None, :], True
    if z.ndim != 2 or z.shape[1] != dim:
        raise DimensionMismatch(f"expected shape (n, {dim}), got {z.shape}")
    return z, False


@dataclass(frozen=True)
class LocationScaleParams:
    """A member of a location-scale family: location ``nu`` and
    lower-triangular scale factor ``scale_tril`` (positive diagonal), over
    base density ``base``.  Immutable; updates go through ``with_*``.
    """

    nu: NDArray
    scale_tril: NDArray
    base: BaseDensity

    def __post_init__(self):
        nu = np.array(self.nu, dtype=float).reshape(-1)
        tril = np.array(self.scale_tril, dtype=float)
        d = self.base.dim
        if nu.shape != (d,):
            raise DimensionMismatch(f"nu has shape {nu.shape}, base dim is {d}")
        if tril.shape != (d, d):
            raise DimensionMismatch(f"scale_tril has shape {tril.shape}, base dim is {d}")
        if not np.allclose(tril, np.tril(tril), atol=0, rtol=0):
            raise InvalidParameter("scale_tril must be lower-triangular")
        if np.any(np.diag(tril) <= 0):
            raise InvalidParameter("scale_tril diagonal must be strictly positive")
        nu.setflags(write=False)
        tril.setflags(write=False)
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "scale_tril", tril)

    @property
    def dim(self) -> int:
        return self.base.dim

    def cov(self) -> NDArray:
        """Scale matrix S = L @ L.T (the covariance up to the base's
        radial second moment)."""
        return self.scale_tril @ self.scale_tril.T

    def log_det_scale_factor(self) -> float:
        return float(np.sum(np.log(np.diag(self.scale_tril))))

    # -- density / sampling ---------------------------------------------

    def log_density(self, z: NDArray) -> float | NDArray:
        z, squeeze = _as_batch(z, self.dim)
        zeta = solve_triangular(self.scale_tril, (z - self.nu).T, lower=True).T
        out = self.base.log_density(zeta) - self.log_det_scale_factor()
        return float(out[0]) if squeeze else out

    def grad_log_density(self, z: NDArray) -> NDArray:
        z, squeeze = _as_batch(z, self.dim)
        zeta = solve_triangular(self.scale_tril, (z - self.nu).T, lower=True).T
        g0 = self.base.grad_log_density(zeta)
        out = solve_triangular(self.scale_tril, g0.T, lower=True, trans="T").T
        return out[0] if squeeze else out

    def sample(self, rng: np.random.Generator, n: int) -> NDArray:
        if n < 1:
            raise InvalidParameter("need n >= 1 samples")
        return self.nu + self.base.sample(rng, n) @ self.scale_tril.T

    # -- updates ---------------------------------------------------------

    def with_location(self, nu: NDArray) -> "LocationScaleParams":
        return replace(self, nu=np.asarray(nu, dtype=float))

    def with_scale(self, scale_tril: NDArray) -> "LocationScaleParams":
        return replace(self, scale_tril=np.asarray(scale_tril, dtype=float))

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        doc = {
            "family": self.base.kind,
            "nu": self.nu.tolist(),
            "scale_factor_rows": [
                self.scale_tril[i, : i + 1].tolist() for i in range(self.dim)
            ],
        }
        if self.base.kind == "student_t":
            doc["df"] = self.base.df
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "LocationScaleParams":
        nu = np.asarray(doc["nu"], dtype=float)
        d = nu.shape[0]
        tril = np.zeros((d, d))
        for i, row in enumerate(doc["scale_factor_rows"]):
            tril[i, : i + 1] = row
        base = BaseDensity(doc["family"], d, doc.get("df"))
        return cls(nu, tril, base)


@dataclass(frozen=True)
class LocationFamily:
    """View of a LocationScaleParams in which only the location is free.

    Shares the sampling/density surface of the wrapped parameters; any
    scale update raises :class:`ScaleFrozen`.
    """

    params: LocationScaleParams

    @property
    def dim(self):
        return self.params.dim

    @property
    def nu(self):
        return self.params.nu

    @property
    def scale_tril(self):
        return self.params.scale_tril

    @property
    def base(self):
        return self.params.base

    def cov(self):
        return self.params.cov()

    def log_det_scale_factor(self):
        return self.params.log_det_scale_factor()

    def log_density(self, z):
        return self.params.log_density(z)

    def grad_log_density(self, z):
        return self.params.grad_log_density(z)

    def sample(self, rng, n):
        return self.params.sample(rng, n)

    def with_location(self, nu) -> "LocationFamily":
        return LocationFamily(self.params.with_location(nu))

    def with_scale(self, scale_tril):
        raise ScaleFrozen("scale updates are not allowed on a frozen-scale handle")


def freeze_scale(q: LocationScaleParams) -> LocationFamily:
    """Return a location-only view of ``q`` (Theorem-1-style fits)."""
    if isinstance(q, LocationFamily):
        return q
    return LocationFamily(q)


def is_scale_frozen(q) -> bool:
    return isinstance(q, LocationFamily)
