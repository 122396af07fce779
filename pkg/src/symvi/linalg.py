"""Positive-definite matrix utilities.

Dense-only factorizations, symmetric square roots, Mahalanobis distances
and covariance/correlation conversions.  Everything here assumes desk
scale (dim of order ten); no attempt is made to exploit sparsity.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import solve_triangular

from .errors import DimensionMismatch, NotPositiveDefinite

__all__ = [
    "PDMatrix",
    "cholesky",
    "sqrt_pd",
    "mahalanobis",
    "normalized_cov",
    "correlation_of",
]

# Pivots below this fraction of the largest diagonal entry are treated as
# a positive-definiteness failure: silently accepting a near-singular
# factor corrupts Mahalanobis values downstream.
PIVOT_RTOL = 1e-12

SYMMETRY_ATOL = 1e-12


def cholesky(m: NDArray) -> NDArray:
    """Lower Cholesky factor of a symmetric positive-definite matrix.

    Parameters
    ----------
    m : ndarray, shape (d, d)
        Symmetric matrix to factor.

    Returns
    -------
    L : ndarray, shape (d, d)
        Lower-triangular with strictly positive diagonal, ``L @ L.T == m``
        to relative 1e-10.

    Raises
    ------
    NotPositiveDefinite
        If a pivot is non-positive or falls below ``PIVOT_RTOL`` times the
        largest diagonal entry of ``m``.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    try:
        chol = np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"Cholesky factorization failed: {exc}") from exc
    pivots = np.diag(chol) ** 2
    if np.any(pivots <= PIVOT_RTOL * np.max(np.diag(m))):
        raise NotPositiveDefinite(
            "matrix is numerically singular: smallest pivot "
            f"{pivots.min():.3e} below tolerance"
        )
    return chol


class PDMatrix:
    """Symmetric positive-definite matrix with a cached Cholesky factor.

    Construction validates symmetry (absolute tolerance 1e-12 per entry)
    and positive definiteness; instances are immutable afterwards and safe
    to share across threads.

    Attributes
    ----------
    entries : ndarray, shape (d, d)
        The matrix itself (read-only).
    chol : ndarray, shape (d, d)
        Cached lower Cholesky factor (read-only).
    """

    __slots__ = ("entries", "chol")

    def __init__(self, entries: NDArray):
        entries = np.array(entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise DimensionMismatch(f"expected a square matrix, got shape {entries.shape}")
        if not np.all(np.abs(entries - entries.T) <= SYMMETRY_ATOL):
            raise NotPositiveDefinite(
                "matrix is not symmetric to within 1e-12 per entry"
            )
        # Exact symmetrization so the cached factor matches `entries` bitwise.
        entries = 0.5 * (entries + entries.T)
        chol = cholesky(entries)
        entries.setflags(write=False)
        chol.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "chol", chol)

    def __setattr__(self, name, value):
        raise AttributeError("PDMatrix is immutable")

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def logdet(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.chol))))

    def solve(self, rhs: NDArray) -> NDArray:
        """Solve ``self @ x = rhs`` via the cached factor."""
        y = solve_triangular(self.chol, rhs, lower=True)
        return solve_triangular(self.chol, y, lower=True, trans="T")

    def __repr__(self):
        return f"PDMatrix(dim={self.dim})"


def as_pd(m) -> PDMatrix:
    """Coerce an array or PDMatrix into a PDMatrix."""
    return m if isinstance(m, PDMatrix) else PDMatrix(m)


def sqrt_pd(m) -> PDMatrix:
    """Unique symmetric positive-definite square root, by eigendecomposition.

    Returns the R with ``R @ R == m`` (to relative 1e-10).  This is the
    natural square root used wherever a scale matrix enters through its
    half power; it is distinct from the Cholesky factor.
    """
    m = as_pd(m)
    w, v = np.linalg.eigh(m.entries)
    if np.any(w <= PIVOT_RTOL * np.max(w)):
        raise NotPositiveDefinite("eigenvalues not strictly positive")
    r = (v * np.sqrt(w)) @ v.T
    return PDMatrix(0.5 * (r + r.T))


def mahalanobis(z: NDArray, nu: NDArray, m) -> float | NDArray:
    """Mahalanobis distance sqrt((z-nu)^T m^-1 (z-nu)).

    Computed with a triangular solve against the cached Cholesky factor.
    ``z`` may be a single vector of shape (d,) or a batch of shape (n, d).
    """
    m = as_pd(m)
    z = np.asarray(z, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if z.shape[-1] != m.dim or nu.shape != (m.dim,):
        raise DimensionMismatch(
            f"z has trailing dim {z.shape[-1]}, nu shape {nu.shape}, matrix dim {m.dim}"
        )
    dev = np.atleast_2d(z - nu)
    y = solve_triangular(m.chol, dev.T, lower=True)
    out = np.sqrt(np.sum(y * y, axis=0))
    return float(out[0]) if z.ndim == 1 else out


def normalized_cov(sigma) -> PDMatrix:
    """Normalized covariance M = d * Sigma / trace(Sigma).

    The output has trace exactly equal to its dimension (to 1e-12) and the
    same correlation structure as the input.
    """
    sigma = as_pd(sigma)
    return PDMatrix(sigma.dim * sigma.entries / np.trace(sigma.entries))


def correlation_of(sigma) -> PDMatrix:
    """Correlation matrix of a covariance: entry (i,j) is
    Sigma_ij / sqrt(Sigma_ii Sigma_jj), with an exactly unit diagonal.

    Invariant under ``sigma -> gamma**2 * sigma`` for any nonzero gamma.
    """
    sigma = as_pd(sigma)
    sd = np.sqrt(np.diag(sigma.entries))
    corr = sigma.entries / np.outer(sd, sd)
    np.fill_diagonal(corr, 1.0)
    return PDMatrix(0.5 * (corr + corr.T))
