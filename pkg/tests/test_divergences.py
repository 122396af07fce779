import warnings

import numpy as np
import pytest

from symvi.divergences import (
    UnnormalizedObjectiveWarning,
    builtin_phi,
    estimate,
    estimate_quadrature,
    parse_divergence,
    pathwise_grad,
    pathwise_grad_quadrature,
)
from symvi.errors import (
    DimensionTooLarge,
    InvalidAlpha,
    NonFiniteLogDensity,
    UnknownDivergence,
)
from symvi.families import LocationScaleParams, standard_laplace, standard_normal
from symvi.linalg import cholesky
from symvi.targets import default_schools_data, make_gaussian, make_schools
from symvi.targets.base import BenchmarkMoments, SymmetryMeta, Target
from symvi.linalg import PDMatrix

ALL = ["reverse_kl", "renyi:0.5", "forward_kl", "hellinger_sq", "total_variation"]


def gaussian_pair(mean=0.5, sd=1.2):
    """Target N(0,1) and family member N(mean, sd^2)."""
    target = make_gaussian([0.0], [[1.0]])
    q = LocationScaleParams([mean], [[sd]], standard_normal(1))
    return target, q


def closed_form_reverse_kl(mean, sd):
    # KL(q||p) for q = N(mean, sd^2), p = N(0, 1)
    return -np.log(sd) + (sd**2 + mean**2) / 2.0 - 0.5


def closed_form_hellinger_phi(mean, sd):
    # integral (sqrt(p/q) - 1)^2 q = 2 (1 - BC) with the Gaussian
    # Bhattacharyya coefficient BC = sqrt(2 s1 s2/(s1^2+s2^2)) exp(-d^2/(4(s1^2+s2^2)))
    s1, s2 = 1.0, sd
    bc = np.sqrt(2 * s1 * s2 / (s1**2 + s2**2)) * np.exp(-(mean**2) / (4 * (s1**2 + s2**2)))
    return 2.0 * (1.0 - bc)


class TestRegistry:
    def test_reverse_kl_is_negation(self):
        assert builtin_phi("reverse_kl").phi(np.array([1.0]))[0] == -1.0

    @pytest.mark.parametrize("name", ALL)
    def test_phi_zero_is_zero(self, name):
        assert parse_divergence(name).phi(np.array([0.0]))[0] == 0.0

    def test_renyi_closed_form_value(self):
        phi = builtin_phi("renyi", 0.5)
        expected = (np.exp(0.5) - 1.0) / (0.5 * (0.5 - 1.0))
        np.testing.assert_allclose(phi.phi(np.array([1.0]))[0], expected, rtol=1e-14)

    def test_flags(self):
        assert builtin_phi("reverse_kl").strictly_decreasing
        assert builtin_phi("reverse_kl").linear
        assert builtin_phi("reverse_kl").is_f_divergence
        r_low = builtin_phi("renyi", 0.5)
        assert r_low.strictly_decreasing and not r_low.linear
        assert not r_low.is_f_divergence
        r_high = builtin_phi("renyi", 2.0)
        assert not r_high.strictly_decreasing and r_high.is_f_divergence
        for name in ("forward_kl", "hellinger_sq", "total_variation"):
            spec = builtin_phi(name)
            assert not spec.strictly_decreasing and not spec.linear
            assert spec.is_f_divergence
        assert not builtin_phi("total_variation").differentiable_everywhere

    def test_monotone_flag_matches_sampled_slopes(self):
        rng = np.random.default_rng(31)
        t0 = rng.uniform(-5, 5, size=500)
        t1 = t0 + rng.uniform(0.01, 1.0, size=500)
        for label in ("reverse_kl", "renyi:0.5"):
            phi = parse_divergence(label)
            assert np.all(phi.phi(t1) < phi.phi(t0))

    def test_invalid_alpha(self):
        for alpha in (0.0, 1.0, -0.5):
            with pytest.raises(InvalidAlpha):
                builtin_phi("renyi", alpha)
        with pytest.raises(InvalidAlpha):
            builtin_phi("renyi")
        with pytest.raises(InvalidAlpha):
            parse_divergence("renyi:1.0")
        with pytest.raises(InvalidAlpha):
            builtin_phi("reverse_kl", 0.5)

    def test_unknown_divergence(self):
        with pytest.raises(UnknownDivergence):
            builtin_phi("chi_squared")

    def test_total_variation_subgradient_at_zero(self):
        assert builtin_phi("total_variation").phi_prime(np.array([0.0]))[0] == 0.0


class TestEstimate:
    @pytest.mark.parametrize("name", ALL)
    def test_zero_at_equality(self, name):
        # D(p||p) = 0 since phi(0) = 0.
        target = make_gaussian([0.3], [[1.5**2]])
        q = LocationScaleParams([0.3], [[1.5]], standard_normal(1))
        est = estimate(parse_divergence(name), target, q, n=20_000, seed=0)
        assert abs(est.value) <= max(3 * est.std_error, 1e-12)

    def test_reverse_kl_closed_form(self):
        target, q = gaussian_pair(0.5, 1.2)
        est = estimate(builtin_phi("reverse_kl"), target, q, n=100_000, seed=1)
        assert abs(est.value - closed_form_reverse_kl(0.5, 1.2)) <= 4 * est.std_error

    def test_hellinger_closed_form(self):
        target, q = gaussian_pair(0.5, 1.2)
        est = estimate(builtin_phi("hellinger_sq"), target, q, n=100_000, seed=2)
        assert abs(est.value - closed_form_hellinger_phi(0.5, 1.2)) <= 4 * est.std_error

    def test_deterministic_given_seed(self):
        target, q = gaussian_pair()
        phi = builtin_phi("forward_kl")
        a = estimate(phi, target, q, n=5000, seed=42)
        b = estimate(phi, target, q, n=5000, seed=42)
        assert a == b

    def test_std_error_definition(self):
        target, q = gaussian_pair()
        est = estimate(builtin_phi("reverse_kl"), target, q, n=1000, seed=3)
        assert est.std_error >= 0 and est.n_samples == 1000 and est.seed == 3

    def test_non_finite_log_ratio_raises(self):
        # Bounded-support target: draws outside land at -inf.
        def logp(z):
            z = np.atleast_2d(z)
            with np.errstate(divide="ignore"):
                return np.where(np.abs(z[:, 0]) < 1.0, 0.0, -np.inf)

        target = Target(
            name="box",
            dim=1,
            log_density=logp,
            grad_log_density=lambda z: np.zeros_like(np.atleast_2d(z)),
            symmetry=SymmetryMeta(kind="asymmetric"),
            normalized=False,
        )
        q = LocationScaleParams([0.0], [[2.0]], standard_normal(1))
        with pytest.raises(NonFiniteLogDensity):
            estimate(builtin_phi("reverse_kl"), target, q, n=500, seed=0)

    def test_unnormalized_warning_for_nonlinear_phi(self):
        target = make_schools(default_schools_data(), "marginalized")
        q = LocationScaleParams(np.array([6.0, 0.7]), np.eye(2), standard_normal(2))
        with pytest.warns(UnnormalizedObjectiveWarning):
            estimate(builtin_phi("hellinger_sq"), target, q, n=500, seed=0)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            estimate(builtin_phi("reverse_kl"), target, q, n=500, seed=0)


class TestQuadrature:
    def test_zero_at_equality(self):
        target = make_gaussian([0.0], [[1.0]])
        q = LocationScaleParams([0.0], [[1.0]], standard_normal(1))
        assert abs(estimate_quadrature(builtin_phi("reverse_kl"), target, q)) <= 1e-8

    def test_reverse_kl_closed_form(self):
        target, q = gaussian_pair(0.5, 1.2)
        val = estimate_quadrature(builtin_phi("reverse_kl"), target, q)
        assert abs(val - closed_form_reverse_kl(0.5, 1.2)) <= 1e-6

    @pytest.mark.parametrize("name", ALL)
    def test_monte_carlo_agreement(self, name):
        rng = np.random.default_rng(33)
        phi = parse_divergence(name)
        for _ in range(3):
            mean = rng.uniform(-1, 1)
            sd = rng.uniform(0.8, 1.5)
            target, q = gaussian_pair(mean, sd)
            quad = estimate_quadrature(phi, target, q)
            mc = estimate(phi, target, q, n=40_000, seed=int(rng.integers(1 << 30)))
            assert abs(quad - mc.value) <= 4 * mc.std_error

    @pytest.mark.parametrize("name", ALL)
    def test_nonnegative_on_normalized_pairs(self, name):
        rng = np.random.default_rng(34)
        phi = parse_divergence(name)
        for _ in range(5):
            target, q = gaussian_pair(rng.uniform(-1.5, 1.5), rng.uniform(0.5, 2.0))
            assert estimate_quadrature(phi, target, q) >= -1e-8

    @pytest.mark.parametrize("name", ALL)
    def test_refinement_stability(self, name):
        # Doubling the resolution of the default oracle grid moves the
        # value by less than 1e-6.
        phi = parse_divergence(name)
        target, q = gaussian_pair(0.4, 1.3)
        coarse = estimate_quadrature(phi, target, q, grid=((-10.0, 10.0, 2001),))
        fine = estimate_quadrature(phi, target, q, grid=((-10.0, 10.0, 4001),))
        assert abs(coarse - fine) < 1e-6

    def test_renyi_interpolates_kl_endpoints(self):
        target, q = gaussian_pair(0.6, 1.25)
        rkl = estimate_quadrature(builtin_phi("reverse_kl"), target, q)
        fkl = estimate_quadrature(builtin_phi("forward_kl"), target, q)
        near0 = estimate_quadrature(builtin_phi("renyi", 0.01), target, q)
        near1 = estimate_quadrature(builtin_phi("renyi", 0.99), target, q)
        assert abs(near0 - rkl) / rkl <= 0.02
        assert abs(near1 - fkl) / fkl <= 0.02

    def test_total_variation_equals_l1_distance(self):
        # int |e^t - 1| q = int |p - q|, checked against direct
        # z-space integration of |p - q|.
        target, q = gaussian_pair(0.5, 1.2)
        val = estimate_quadrature(builtin_phi("total_variation"), target, q)
        z = np.linspace(-30.0, 30.0, 120_001)[:, None]
        w = np.full(len(z), z[1, 0] - z[0, 0])
        w[0] *= 0.5
        w[-1] *= 0.5
        l1 = np.sum(w * np.abs(np.exp(target.log_density(z)) - np.exp(q.log_density(z))))
        assert abs(val - l1) <= 1e-6

    def test_dimension_too_large(self):
        target = make_gaussian(np.zeros(3), np.eye(3))
        q = LocationScaleParams(np.zeros(3), np.eye(3), standard_normal(3))
        with pytest.raises(DimensionTooLarge):
            estimate_quadrature(builtin_phi("reverse_kl"), target, q)

    def test_laplace_base_grid(self):
        # p = q for a Laplace family member: identically zero integrand.
        base = standard_laplace(1)
        q = LocationScaleParams([0.0], [[1.0]], base)
        target = Target(
            name="laplace_pdf",
            dim=1,
            log_density=q.log_density,
            grad_log_density=q.grad_log_density,
            symmetry=SymmetryMeta(kind="full_even", sigma_indices=(0,), even_point=np.zeros(1)),
            benchmark=BenchmarkMoments(np.zeros(1), PDMatrix([[2.0]]), "analytic"),
        )
        assert estimate_quadrature(builtin_phi("reverse_kl"), target, q) == 0.0


class TestPathwiseGrad:
    def test_matches_finite_differences_of_estimate(self):
        # Same seed means common random numbers, so the FD of the MC
        # objective converges to the pathwise gradient.
        rng = np.random.default_rng(35)
        phi = builtin_phi("reverse_kl")
        for _ in range(5):
            mean = rng.uniform(-1, 1)
            sd = rng.uniform(0.8, 1.4)
            target, q = gaussian_pair(mean, sd)
            n, seed = 20_000, int(rng.integers(1 << 30))
            grad_nu, grad_L = pathwise_grad(phi, target, q, n=n, seed=seed)
            h = 1e-4
            up = estimate(phi, target, q.with_location([mean + h]), n=n, seed=seed).value
            dn = estimate(phi, target, q.with_location([mean - h]), n=n, seed=seed).value
            assert abs(grad_nu[0] - (up - dn) / (2 * h)) <= 1e-4
            up = estimate(phi, target, q.with_scale([[sd + h]]), n=n, seed=seed).value
            dn = estimate(phi, target, q.with_scale([[sd - h]]), n=n, seed=seed).value
            assert abs(grad_L[0, 0] - (up - dn) / (2 * h)) <= 1e-4

    def test_closed_form_kl_gradient(self):
        # d KL/d nu = nu, d KL/d sigma = sigma - 1/sigma for q = N(nu, sigma^2), p = N(0,1)
        target, q = gaussian_pair(0.5, 1.2)
        grad_nu, grad_L = pathwise_grad(builtin_phi("reverse_kl"), target, q, n=200_000, seed=5)
        assert abs(grad_nu[0] - 0.5) <= 0.01
        assert abs(grad_L[0, 0] - (1.2 - 1.0 / 1.2)) <= 0.01

    def test_quadrature_gradient_closed_form(self):
        target, q = gaussian_pair(0.5, 1.2)
        grad_nu, grad_L = pathwise_grad_quadrature(builtin_phi("reverse_kl"), target, q)
        np.testing.assert_allclose(grad_nu, [0.5], atol=1e-10)
        np.testing.assert_allclose(grad_L, [[1.2 - 1.0 / 1.2]], atol=1e-10)

    def test_stationary_at_even_target_mean(self):
        # Frozen-scale stationarity for an even target at nu = mu.
        target = make_gaussian([0.7], [[2.0]])
        for label in ALL:
            phi = parse_divergence(label)
            q = LocationScaleParams([0.7], [[1.3]], standard_normal(1))
            grad_nu, _ = pathwise_grad_quadrature(phi, target, q)
            assert abs(grad_nu[0]) < 1e-6, label

    def test_2d_gradient_finite_differences(self):
        rng = np.random.default_rng(36)
        target = make_gaussian([0.2, -0.4], [[1.5, 0.6], [0.6, 1.2]])
        L = np.array([[1.1, 0.0], [0.3, 0.9]])
        q = LocationScaleParams(np.array([0.5, 0.1]), L, standard_normal(2))
        phi = builtin_phi("renyi", 0.5)
        grad_nu, grad_L = pathwise_grad_quadrature(phi, target, q, grid=((-9, 9, 201), (-9, 9, 201)))
        h = 1e-5

        def obj(nu, tril):
            qq = LocationScaleParams(nu, tril, standard_normal(2))
            return estimate_quadrature(phi, target, qq, grid=((-9, 9, 201), (-9, 9, 201)))

        for k in range(2):
            e = np.zeros(2)
            e[k] = h
            fd = (obj(q.nu + e, L) - obj(q.nu - e, L)) / (2 * h)
            assert abs(grad_nu[k] - fd) <= 1e-6
        for i, j in ((0, 0), (1, 0), (1, 1)):
            dL = np.zeros((2, 2))
            dL[i, j] = h
            fd = (obj(q.nu, L + dL) - obj(q.nu, L - dL)) / (2 * h)
            assert abs(grad_L[i, j] - fd) <= 1e-6
