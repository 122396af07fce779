"""Registry of phi-divergences and their estimators.

A divergence is ``D(p||q) = integral phi(log p(z) - log q(z)) q(z) dz``
for a scalar function ``phi`` with ``phi(0) = 0``.  Estimators come in
two flavors: Monte Carlo over reparameterized draws from q (any
dimension), and deterministic trapezoid quadrature on a tensor grid in
the base variable (dim <= 2), which serves as the oracle for the
stationarity and grid-search experiments.
"""

from __future__ import annotations

import functools
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.typing import NDArray

from .errors import (
    DimensionMismatch,
    DimensionTooLarge,
    InvalidAlpha,
    NonFiniteGradient,
    NonFiniteLogDensity,
    UnknownDivergence,
)
from .families import LocationFamily, LocationScaleParams

__all__ = [
    "PhiSpec",
    "DivergenceEstimate",
    "builtin_phi",
    "parse_divergence",
    "estimate",
    "estimate_quadrature",
    "pathwise_grad",
    "pathwise_grad_quadrature",
    "base_grid_axes",
    "BUILTIN_NAMES",
]

BUILTIN_NAMES = ("reverse_kl", "renyi", "forward_kl", "hellinger_sq", "total_variation")

DEFAULT_MC_SAMPLES = 10_000


class UnnormalizedObjectiveWarning(UserWarning):
    """A non-linear phi was evaluated against an unnormalized target.

    For the reverse KL (linear phi) an unknown normalizing constant only
    shifts the objective by a constant; for every other phi the reported
    value is the divergence to the unnormalized density.
    """


@dataclass(frozen=True)
class PhiSpec:
    """A phi-divergence: the scalar function, its derivative, and the
    regularity flags the theory keys on.

    ``convex`` records convexity of the induced ratio-scale function
    ``r -> phi(log r)`` on r > 0 (the f-divergence sense, which holds for
    every builtin; phi itself is not convex in the log-ratio for the
    Renyi orders in (0, 1)).  ``strictly_decreasing`` and ``linear``
    refer to phi as a function of the log-ratio.
    """

    name: str
    phi: Callable[[NDArray], NDArray]
    phi_prime: Callable[[NDArray], NDArray]
    alpha: float | None = None
    convex: bool = True
    strictly_decreasing: bool = False
    linear: bool = False
    differentiable_everywhere: bool = True
    is_f_divergence: bool = True

    def label(self) -> str:
        return self.name if self.alpha is None else f"{self.name}:{self.alpha:g}"


@dataclass(frozen=True)
class DivergenceEstimate:
    value: float
    std_error: float
    n_samples: int
    seed: int


def _check_registry_invariants(spec: PhiSpec) -> None:
    """Invariants asserted when a builtin is constructed: phi(0) = 0,
    ratio-scale convexity, monotonicity flag, derivative consistency."""
    if spec.phi(np.zeros(1))[0] != 0.0:
        raise AssertionError(f"{spec.label()}: phi(0) != 0")
    rng = np.random.default_rng(20240917)
    # Convexity of f(r) = phi(log r), checked on random positive triples.
    r0, r1 = np.exp(rng.uniform(-4, 4, size=(2, 1000)))
    lam = rng.uniform(0.0, 1.0, size=1000)
    r_mid = (1 - lam) * r0 + lam * r1
    lhs = spec.phi(np.log(r_mid))
    rhs = (1 - lam) * spec.phi(np.log(r0)) + lam * spec.phi(np.log(r1))
    if not np.all(lhs <= rhs + 1e-9):
        raise AssertionError(f"{spec.label()}: ratio-scale convexity check failed")
    if spec.strictly_decreasing:
        t0 = rng.uniform(-6, 6, size=1000)
        t1 = t0 + rng.uniform(1e-3, 2.0, size=1000)
        if not np.all(spec.phi(t1) < spec.phi(t0)):
            raise AssertionError(f"{spec.label()}: not strictly decreasing")
    # Derivative vs central finite differences away from kinks.
    t = rng.uniform(-4, 4, size=200)
    if not spec.differentiable_everywhere:
        t = t[np.abs(t) > 1e-2]
    h = 1e-6
    fd = (spec.phi(t + h) - spec.phi(t - h)) / (2 * h)
    if not np.allclose(spec.phi_prime(t), fd, atol=1e-5, rtol=1e-5):
        raise AssertionError(f"{spec.label()}: phi_prime mismatch with finite differences")


@functools.lru_cache(maxsize=None)
def _builtin(name: str, alpha: float | None) -> PhiSpec:
    if name == "reverse_kl":
        spec = PhiSpec(
            name,
            phi=lambda t: -np.asarray(t, dtype=float),
            phi_prime=lambda t: -np.ones_like(np.asarray(t, dtype=float)),
            strictly_decreasing=True,
            linear=True,
        )
    elif name == "renyi":
        if alpha is None:
            raise InvalidAlpha("renyi requires an order, e.g. renyi:0.5")
        if alpha <= 0 or alpha in (0.0, 1.0):
            raise InvalidAlpha(f"renyi order must be positive and != 1, got {alpha}")
        denom = alpha * (alpha - 1.0)
        spec = PhiSpec(
            name,
            phi=lambda t, a=alpha, d=denom: np.expm1(a * np.asarray(t, dtype=float)) / d,
            phi_prime=lambda t, a=alpha: np.exp(a * np.asarray(t, dtype=float)) / (a - 1.0),
            alpha=alpha,
            strictly_decreasing=0.0 < alpha < 1.0,
            # Renyi orders in (0, 1) are phi- but not f-divergences.
            is_f_divergence=not (0.0 < alpha < 1.0),
        )
    elif name == "forward_kl":
        spec = PhiSpec(
            name,
            phi=lambda t: np.asarray(t, dtype=float) * np.exp(t),
            phi_prime=lambda t: np.exp(t) * (1.0 + np.asarray(t, dtype=float)),
        )
    elif name == "hellinger_sq":
        spec = PhiSpec(
            name,
            phi=lambda t: np.expm1(0.5 * np.asarray(t, dtype=float)) ** 2,
            phi_prime=lambda t: np.expm1(0.5 * np.asarray(t, dtype=float))
            * np.exp(0.5 * np.asarray(t, dtype=float)),
        )
    elif name == "total_variation":
        # phi'(0) is undefined; 0 is the subgradient choice.  TV is kept
        # out of gradient-based optimization (quadrature/grid only).
        spec = PhiSpec(
            name,
            phi=lambda t: np.abs(np.expm1(t)),
            phi_prime=lambda t: np.sign(np.asarray(t, dtype=float)) * np.exp(t),
            differentiable_everywhere=False,
        )
    else:
        raise UnknownDivergence(
            f"unknown divergence {name!r}; expected one of {', '.join(BUILTIN_NAMES)}"
        )
    _check_registry_invariants(spec)
    return spec


def builtin_phi(name: str, alpha: float | None = None) -> PhiSpec:
    """Look up a Table-style builtin divergence by name.

    ``renyi`` requires the order ``alpha`` (positive, not 0 or 1); other
    names reject an alpha argument.
    """
    if name != "renyi" and alpha is not None:
        raise InvalidAlpha(f"{name} does not take an order parameter")
    return _builtin(name, alpha)


def parse_divergence(spec: str) -> PhiSpec:
    """Parse a CLI divergence string such as ``reverse_kl`` or ``renyi:0.5``."""
    if ":" in spec:
        name, _, raw = spec.partition(":")
        try:
            alpha = float(raw)
        except ValueError as exc:
            raise InvalidAlpha(f"could not parse order in {spec!r}") from exc
        return builtin_phi(name, alpha)
    return builtin_phi(spec)


# ---------------------------------------------------------------------------
# Monte Carlo estimators
# ---------------------------------------------------------------------------


def _log_ratio(target, q, z) -> NDArray:
    ell = np.asarray(target.log_density(z), dtype=float) - np.asarray(
        q.log_density(z), dtype=float
    )
    return ell


def _warn_if_unnormalized(phi: PhiSpec, target) -> None:
    if not getattr(target, "normalized", True) and not phi.linear:
        warnings.warn(
            f"target {getattr(target, 'name', '?')!r} is unnormalized; the "
            f"{phi.label()} objective is reported against the unnormalized density",
            UnnormalizedObjectiveWarning,
            stacklevel=3,
        )


def estimate(phi: PhiSpec, target, q, n: int = DEFAULT_MC_SAMPLES, seed: int = 0) -> DivergenceEstimate:
    """Monte Carlo estimate of D_phi(p||q) over n reparameterized draws.

    Deterministic given the seed.  Raises NonFiniteLogDensity if any draw
    produces a NaN/inf log-ratio (tail mismatch or invalid parameters).
    """
    if target.dim != q.dim:
        raise DimensionMismatch(f"target dim {target.dim} != family dim {q.dim}")
    if n < 2:
        raise DimensionMismatch("need n >= 2 samples for a standard error")
    _warn_if_unnormalized(phi, target)
    rng = np.random.default_rng(seed)
    z = q.sample(rng, n)
    ell = _log_ratio(target, q, z)
    if not np.all(np.isfinite(ell)):
        raise NonFiniteLogDensity(
            f"{int(np.sum(~np.isfinite(ell)))} of {n} draws produced a non-finite log-ratio"
        )
    vals = phi.phi(ell)
    if not np.all(np.isfinite(vals)):
        raise NonFiniteLogDensity("phi(log-ratio) overflowed on some draws")
    return DivergenceEstimate(
        value=float(np.mean(vals)),
        std_error=float(np.std(vals, ddof=1) / np.sqrt(n)),
        n_samples=n,
        seed=seed,
    )


def pathwise_grad(
    phi: PhiSpec, target, q, n: int = DEFAULT_MC_SAMPLES, seed: int = 0
) -> tuple[NDArray, NDArray]:
    """Reparameterization gradient of the Monte Carlo objective.

    Averages the pathwise derivative of ``phi(log p(nu + L zeta) -
    log q(nu + L zeta))`` holding the base draws fixed. Returns gradients
    with respect to (nu, L); the L part is restricted to the lower
    triangle.  With the same seed it matches central finite differences
    of :func:`estimate`.
    """
    if target.dim != q.dim:
        raise DimensionMismatch(f"target dim {target.dim} != family dim {q.dim}")
    rng = np.random.default_rng(seed)
    zeta = q.base.sample(rng, n)
    grad_nu, grad_L, _ = _pathwise_terms(phi, target, q, zeta, None)
    return grad_nu, grad_L


def _pathwise_terms(phi, target, q, zeta, weights, logq0=None):
    """Shared pathwise-gradient kernel over explicit base points.

    ``weights`` is None for a plain Monte Carlo average, or quadrature
    weights already multiplied by the base density.
    """
    L = q.scale_tril
    nu = q.nu
    z = nu + zeta @ L.T
    if logq0 is None:
        logq0 = np.asarray(q.base.log_density(zeta), dtype=float)
    logp = np.asarray(target.log_density(z), dtype=float)
    ell = logp - (logq0 - q.log_det_scale_factor())
    g = np.asarray(target.grad_log_density(z), dtype=float)
    w = phi.phi_prime(ell)
    bad = ~(np.isfinite(w) & np.isfinite(g).all(axis=1))
    if np.any(bad):
        raise NonFiniteGradient(
            f"{int(np.sum(bad))} of {len(zeta)} points produced a non-finite gradient term"
        )
    base_w = np.full(len(zeta), 1.0 / len(zeta)) if weights is None else weights
    wq = w * base_w
    grad_nu = wq @ g
    grad_L = np.tril((g * wq[:, None]).T @ zeta)
    grad_L[np.diag_indices_from(grad_L)] += np.sum(wq) / np.diag(L)
    obj = float(np.sum(phi.phi(ell) * base_w))
    return grad_nu, grad_L, obj


# ---------------------------------------------------------------------------
# Deterministic quadrature (dim <= 2)
# ---------------------------------------------------------------------------

# Half-widths (in base standard-deviation units of the radial profile) and
# point counts chosen so that doubling the resolution moves Gaussian-base
# results by well under 1e-6.  Laplace and student bases need wider
# coverage for their heavier tails; point counts are odd so that a node
# sits exactly at the origin (where the Laplace profile has its kink).
_DEFAULT_GRID = {
    "normal": (10.0, 2001, 201),
    "laplace": (40.0, 4001, 401),
    "student_t": (60.0, 4001, 401),
}


def base_grid_axes(base, n_points: int | None = None) -> tuple[tuple[float, float, int], ...]:
    """Default quadrature axes in the base variable for a family's base."""
    half, n1, n2 = _DEFAULT_GRID[base.kind]
    n = n_points if n_points is not None else (n1 if base.dim == 1 else n2)
    return tuple((-half, half, n) for _ in range(base.dim))


def _axes_of(grid):
    if grid is None:
        return None
    axes = getattr(grid, "axes", grid)
    return tuple((float(lo), float(hi), int(n)) for (lo, hi, n) in axes)


def _tensor_grid(axes):
    """Trapezoid nodes and weights for a tensor product of 1-D axes."""
    nodes_1d, weights_1d = [], []
    for lo, hi, n in axes:
        x = np.linspace(lo, hi, n)
        w = np.full(n, x[1] - x[0])
        w[0] *= 0.5
        w[-1] *= 0.5
        nodes_1d.append(x)
        weights_1d.append(w)
    if len(axes) == 1:
        return nodes_1d[0][:, None], weights_1d[0]
    g1, g2 = np.meshgrid(nodes_1d[0], nodes_1d[1], indexing="ij")
    nodes = np.column_stack([g1.ravel(), g2.ravel()])
    weights = np.outer(weights_1d[0], weights_1d[1]).ravel()
    return nodes, weights


@functools.lru_cache(maxsize=16)
def _cached_base_grid(base, axes):
    """Grid nodes, base-density-weighted trapezoid weights, and the base
    log-density on the nodes.

    Cached because grid searches evaluate thousands of parameter points
    against the same base grid.
    """
    zeta, w = _tensor_grid(axes)
    logq0 = np.asarray(base.log_density(zeta), dtype=float)
    wq0 = w * np.exp(logq0)
    for arr in (zeta, wq0, logq0):
        arr.setflags(write=False)
    return zeta, wq0, logq0


def _quad_points(q, grid):
    axes = _axes_of(grid) or base_grid_axes(q.base)
    if len(axes) != q.dim:
        raise DimensionMismatch(f"grid has {len(axes)} axes, family dim is {q.dim}")
    return _cached_base_grid(q.base, axes)


def estimate_quadrature(phi: PhiSpec, target, q, grid=None) -> float:
    """Tensor-grid trapezoid approximation of D_phi(p||q), dim <= 2.

    The grid lives in the base variable (``z = nu + L zeta``), so its
    axes are expressed in base standard deviations; the default covers
    +/-10 for the normal base and wider for heavy-tailed bases.
    """
    if target.dim > 2:
        raise DimensionTooLarge("quadrature oracle only supports dim <= 2")
    if target.dim != q.dim:
        raise DimensionMismatch(f"target dim {target.dim} != family dim {q.dim}")
    _warn_if_unnormalized(phi, target)
    zeta, wq0, logq0 = _quad_points(q, grid)
    z = q.nu + zeta @ q.scale_tril.T
    ell = np.asarray(target.log_density(z), dtype=float) - (
        logq0 - q.log_det_scale_factor()
    )
    return float(np.sum(phi.phi(ell) * wq0))


def pathwise_grad_quadrature(phi: PhiSpec, target, q, grid=None) -> tuple[NDArray, NDArray]:
    """Deterministic counterpart of :func:`pathwise_grad` on the
    quadrature grid; the oracle for the stationarity tests."""
    if target.dim > 2:
        raise DimensionTooLarge("quadrature oracle only supports dim <= 2")
    zeta, wq0, logq0 = _quad_points(q, grid)
    grad_nu, grad_L, _ = _pathwise_terms(phi, target, q, zeta, wq0, logq0=logq0)
    return grad_nu, grad_L
