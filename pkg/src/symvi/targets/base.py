"""Target density container and symmetry metadata."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from numpy.typing import NDArray

from ..linalg import PDMatrix

__all__ = ["Target", "SymmetryMeta", "BenchmarkMoments", "shift"]

SYMMETRY_KINDS = (
    "full_elliptical",
    "full_even",
    "partial_elliptical",
    "partial_even",
    "asymmetric",
)


@dataclass(frozen=True)
class SymmetryMeta:
    """Which coordinates of the target are (a priori) symmetric.

    ``sigma_indices`` lists the symmetric coordinates; ``even_point`` is
    the point of even symmetry restricted to those coordinates.  For
    Bayesian posteriors the symmetry typically holds in the prior only,
    in which case ``exact`` is False and reflection invariance of the
    log-density is not guaranteed.
    """

    kind: str
    sigma_indices: tuple[int, ...] = ()
    even_point: Optional[NDArray] = None
    normalized_cov_sigma: Optional[PDMatrix] = None
    exact: bool = True

    def __post_init__(self):
        if self.kind not in SYMMETRY_KINDS:
            raise ValueError(f"unknown symmetry kind {self.kind!r}")
        if self.kind != "asymmetric" and self.even_point is None:
            raise ValueError("even_point required unless the target is asymmetric")
        if self.even_point is not None:
            ep = np.asarray(self.even_point, dtype=float)
            ep.setflags(write=False)
            object.__setattr__(self, "even_point", ep)

    def sigma_complement(self, dim: int) -> tuple[int, ...]:
        return tuple(i for i in range(dim) if i not in self.sigma_indices)


@dataclass(frozen=True)
class BenchmarkMoments:
    """Ground-truth mean and covariance, with their provenance."""

    mean: NDArray
    cov: PDMatrix
    source: str  # "analytic" | "generative_sampler" | "grid_quadrature"

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        mean.setflags(write=False)
        object.__setattr__(self, "mean", mean)

    def std(self) -> NDArray:
        return np.sqrt(np.diag(self.cov.entries))


@dataclass(frozen=True)
class Target:
    """A target density with gradient, symmetry metadata and benchmarks.

    ``log_density`` and ``grad_log_density`` accept a single point of
    shape (d,) or a batch of shape (n, d).  ``sampler(rng, n)`` draws
    exact samples when available.  ``normalized`` is False for posterior
    densities known only up to a constant.
    """

    name: str
    dim: int
    log_density: Callable[[NDArray], NDArray]
    grad_log_density: Callable[[NDArray], NDArray]
    symmetry: SymmetryMeta
    benchmark: Optional[BenchmarkMoments] = None
    sampler: Optional[Callable[[np.random.Generator, int], NDArray]] = None
    normalized: bool = True
    log_concave: bool = False


def shift(target: Target, b: NDArray) -> Target:
    """Affine-shift wrapper: the density of ``z - b`` under ``target``.

    Translates the benchmark mean and the point of even symmetry along.
    """
    b = np.asarray(b, dtype=float)
    sym = target.symmetry
    if sym.even_point is not None:
        idx = list(sym.sigma_indices) if sym.sigma_indices else list(range(target.dim))
        sym = replace(sym, even_point=sym.even_point + b[idx])
    bench = target.benchmark
    if bench is not None:
        bench = replace(bench, mean=bench.mean + b)
    sampler = None
    if target.sampler is not None:
        sampler = lambda rng, n, _s=target.sampler: _s(rng, n) + b
    return replace(
        target,
        name=f"{target.name}+shift",
        log_density=lambda z, _f=target.log_density: _f(np.asarray(z, dtype=float) - b),
        grad_log_density=lambda z, _f=target.grad_log_density: _f(np.asarray(z, dtype=float) - b),
        symmetry=sym,
        benchmark=bench,
        sampler=sampler,
    )
