"""Reproduction recipes behind the ``reproduce`` command.

Each experiment computes the data for one figure or table, writes tidy
CSVs (one observation per row) plus a PNG rendering, and returns the
in-memory results so the acceptance suite can assert on the same code
path the CLI runs.  ``budget`` scales resolutions and sample counts; the
defaults are sized for minutes, not hours.
"""

from __future__ import annotations

import numpy as np

from . import plots
from .divergences import builtin_phi, estimate, estimate_quadrature, parse_divergence
from .errors import UnknownFigure
from .families import LocationScaleParams, freeze_scale, standard_laplace, standard_normal
from .linalg import cholesky, correlation_of
from .optimize import FitResult, GridAxis, GridSpec, OptimizerConfig, fit_grid, fit_stochastic
from .output import write_csv, write_json
from .targets import from_spec, make_skew_normal, make_student_t
from .diagnostics import accuracy, asymmetry

__all__ = [
    "ALL_DIVERGENCES",
    "student_meanfield_grid_fit",
    "student_fullcov_grid_fit",
    "skew_location_grid_fit",
    "funnel_reverse_kl_fit",
    "asymmetry_row",
    "run_fig1",
    "run_fig2",
    "run_fig3",
    "run_fig4",
    "run_table2",
    "FIGURES",
]

ALL_DIVERGENCES = ("reverse_kl", "renyi:0.5", "forward_kl", "hellinger_sq", "total_variation")

# Quadrature axes used by the grid searches: +/-8 base standard
# deviations.  Trapezoid rule is spectrally accurate for the Gaussian
# base, so 65 points per axis already ranks parameter points reliably;
# the heavy-tailed forward-KL integrand carries a small truncation bias
# that varies too slowly across neighboring grid points to move argmins.
QUAD_AXES_2D = ((-8.0, 8.0, 65), (-8.0, 8.0, 65))


def _odd(n: float) -> int:
    n = max(int(round(n)), 3)
    return n if n % 2 == 1 else n + 1


# ---------------------------------------------------------------------------
# Student-t grid fits (mean / correlation / variance recovery)
# ---------------------------------------------------------------------------


def student_meanfield_grid_fit(phi, target, budget: float = 1.0):
    """Grid fit of a factorized Gaussian (nu1, nu2, s1, s2) to a 2-D
    target; the location axes are what matters for mean recovery, the
    scale axes are kept coarse."""
    base = standard_normal(2)
    grid = GridSpec(
        (
            GridAxis("nu1", -0.5, 0.5, 21),
            GridAxis("nu2", -0.5, 0.5, 21),
            GridAxis("s1", 0.6, 2.0, _odd(8 * budget)),
            GridAxis("s2", 0.6, 2.0, _odd(8 * budget)),
        )
    )

    def build(point):
        nu1, nu2, s1, s2 = point
        return LocationScaleParams([nu1, nu2], np.diag([s1, s2]), base)

    objective = lambda q: estimate_quadrature(phi, target, q, grid=QUAD_AXES_2D)
    return fit_grid(phi, target, build, grid, objective=objective)


def student_fullcov_grid_fit(phi, target, budget: float = 1.0):
    """Grid fit of a full-covariance Gaussian over (v1, v2, rho) with the
    location pinned to the recovered mean (0,0); S = [[v1, rho*sqrt(v1
    v2)], [., v2]]."""
    base = standard_normal(2)
    grid = GridSpec(
        (
            GridAxis("v1", 1.0, 1.75, _odd(31 * budget)),
            GridAxis("v2", 1.0, 1.75, _odd(31 * budget)),
            GridAxis("rho", 0.5, 0.9, _odd(33 * budget)),
        )
    )

    def build(point):
        v1, v2, rho = point
        cov = np.array(
            [[v1, rho * np.sqrt(v1 * v2)], [rho * np.sqrt(v1 * v2), v2]]
        )
        return LocationScaleParams(np.zeros(2), cholesky(cov), base)

    objective = lambda q: estimate_quadrature(phi, target, q, grid=QUAD_AXES_2D)
    return fit_grid(phi, target, build, grid, objective=objective)


# ---------------------------------------------------------------------------
# Skewed-normal location fits with a Laplace family
# ---------------------------------------------------------------------------

SKEW_NU_GRID = GridSpec((GridAxis("nu", -3.0, 4.0, 701),))


def skew_location_grid_fit(phi, kappa: float, mc_seed=None, mc_n: int = 2000):
    """Location-only Laplace(nu, 1) fit to skewed-N(0, 2^2, kappa) by
    grid search.  With ``mc_seed=None`` the objective is deterministic
    quadrature; otherwise fixed-seed Monte Carlo (a stochastic grid
    search)."""
    target = make_skew_normal(0.0, 2.0, kappa)
    base = standard_laplace(1)

    def build(point):
        return LocationScaleParams([point[0]], np.eye(1), base)

    if mc_seed is None:
        objective = lambda q: estimate_quadrature(phi, target, q)
    else:
        objective = lambda q: estimate(phi, target, q, n=mc_n, seed=mc_seed).value
    res = fit_grid(phi, target, build, SKEW_NU_GRID, objective=objective)
    return res, float(target.benchmark.mean[0])


# ---------------------------------------------------------------------------
# Stochastic funnel fit
# ---------------------------------------------------------------------------


def funnel_reverse_kl_fit(target, seed: int = 0, budget: float = 1.0, **overrides):
    """Full-covariance Gaussian reverse-KL fit via the stochastic
    optimizer, with settings that converge on the funnel geometry."""
    cfg_kwargs = dict(
        batch_size=100,
        max_iters=int(6000 * budget),
        step_size=0.05,
        smoothing_window=50,
        rel_tol=1e-5,
        seed=seed,
        warm_start_meanfield=True,
        warm_start_iters=int(2000 * budget),
    )
    cfg_kwargs.update(overrides)
    cfg = OptimizerConfig(**cfg_kwargs)
    init = LocationScaleParams(
        np.zeros(target.dim), np.eye(target.dim), standard_normal(target.dim)
    )
    return fit_stochastic(builtin_phi("reverse_kl"), target, init, cfg)


# ---------------------------------------------------------------------------
# Asymmetry table
# ---------------------------------------------------------------------------


def asymmetry_row(target, n: int = 20000, seed: int = 0, reflection: str = "point"):
    """One diagnose run: draw benchmark samples, reflect about the
    benchmark mean, report alpha and its 90th percentile."""
    rng = np.random.default_rng(seed)
    samples = target.sampler(rng, n)
    return asymmetry(target, samples, target.benchmark.mean, reflection=reflection)


# ---------------------------------------------------------------------------
# Figure recipes
# ---------------------------------------------------------------------------


def run_fig1(out_dir, seed: int = 0, budget: float = 1.0):
    """Funnel contours and the fitted Gaussian: the fit recovers the mean
    and correlation along theta while misestimating tau."""
    target = from_spec("funnel:2")
    fit = funnel_reverse_kl_fit(target, seed=seed, budget=budget)
    nu = fit.params.nu
    cov = fit.params.cov()

    tau_ax = np.linspace(-4.0, 4.0, 121)
    th_ax = np.linspace(-8.0, 8.0, 121)
    TAU, TH = np.meshgrid(tau_ax, th_ax, indexing="ij")
    # analytic (tau, theta_1) marginal: theta_1 | tau ~ N(0, e^{2 tau})
    logp = (
        -0.5 * TAU**2
        - 0.5 * TH**2 * np.exp(-2.0 * TAU)
        - TAU
        - np.log(2.0 * np.pi)
    )
    grid_rows = [
        (TAU[i, j], TH[i, j], logp[i, j])
        for i in range(TAU.shape[0])
        for j in range(TAU.shape[1])
    ]

    files = [
        write_csv(
            f"{out_dir}/fig1_density_grid.csv", ("tau", "theta1", "log_density"), grid_rows
        ),
        write_csv(
            f"{out_dir}/fig1_fit.csv",
            ("coordinate", "nu", "sd"),
            [(i, nu[i], np.sqrt(cov[i, i])) for i in range(target.dim)],
        ),
        write_json(
            f"{out_dir}/fig1_summary.json",
            {
                "target": target.name,
                "divergence": "reverse_kl",
                "nu": nu,
                "cov": cov,
                "correlation": correlation_of(cov).entries,
                "converged": fit.converged,
                "seed": seed,
            },
        ),
        plots.render_funnel_fit(
            f"{out_dir}/fig1.png",
            tau_ax,
            th_ax,
            logp,
            nu[[0, 1]],
            cov[np.ix_([0, 1], [0, 1])],
        ),
    ]
    return {"fit": fit, "files": files}


def run_fig2(out_dir, seed: int = 0, budget: float = 1.0):
    """Student-t mean/correlation/variance recovery across divergences,
    by grid search with a quadrature objective (no stochasticity; the
    seed is echoed for the manifest only)."""
    target = make_student_t(5.0, 0.7)
    rows = []
    meanfield_plot, fullcov_plot = [], []
    results = {}
    for label in ALL_DIVERGENCES:
        phi = parse_divergence(label)
        mf = student_meanfield_grid_fit(phi, target, budget=budget)
        fc = student_fullcov_grid_fit(phi, target, budget=budget)
        results[label] = {"meanfield": mf, "fullcov": fc}
        nu1, nu2, s1, s2 = mf.point
        v1, v2, rho = fc.point
        for param, value in (
            ("nu1", nu1),
            ("nu2", nu2),
            ("s1", s1),
            ("s2", s2),
            ("objective", mf.value),
        ):
            rows.append((label, "meanfield", param, value))
        for param, value in (
            ("v1", v1),
            ("v2", v2),
            ("rho", rho),
            ("objective", fc.value),
        ):
            rows.append((label, "fullcov", param, value))
        meanfield_plot.append((label, nu1, nu2))
        fullcov_plot.append((label, v1, v2, rho))

    files = [
        write_csv(f"{out_dir}/fig2_data.csv", ("divergence", "family", "param", "value"), rows),
        write_json(
            f"{out_dir}/fig2_summary.json",
            {
                "target": target.name,
                "true_correlation": 0.7,
                "grid_steps": {
                    "nu": results["reverse_kl"]["meanfield"].grid.axes[0].step,
                    "v": results["reverse_kl"]["fullcov"].grid.axes[0].step,
                    "rho": results["reverse_kl"]["fullcov"].grid.axes[2].step,
                },
                "seed": seed,
            },
        ),
        plots.render_student_fits(f"{out_dir}/fig2.png", meanfield_plot, fullcov_plot, 0.7),
    ]
    return {"results": results, "files": files}


FIG3_KAPPAS = (0.0, 1.0, 2.0, 3.0, 4.0, 5.0)
FIG3_N_SEEDS = 10


def run_fig3(out_dir, seed: int = 0, budget: float = 1.0):
    """Laplace location fits to the skewed normal: quadrature argmin per
    (kappa, divergence) plus 10 stochastic grid searches per cell."""
    mc_n = int(2000 * budget)
    rows = []
    err_by = {}
    for kappa in FIG3_KAPPAS:
        for label in ALL_DIVERGENCES:
            phi = parse_divergence(label)
            res, true_mean = skew_location_grid_fit(phi, kappa)
            rows.append((kappa, label, "quadrature", res.point[0], true_mean,
                         abs(res.point[0] - true_mean)))
            errs = []
            for k in range(FIG3_N_SEEDS):
                res_k, _ = skew_location_grid_fit(
                    phi, kappa, mc_seed=seed + k, mc_n=mc_n
                )
                err = abs(res_k.point[0] - true_mean)
                errs.append(err)
                rows.append((kappa, label, seed + k, res_k.point[0], true_mean, err))
            err_by[(kappa, label)] = float(np.mean(errs))

    plot_rows = [(kappa, label, err) for (kappa, label), err in err_by.items()]
    files = [
        write_csv(
            f"{out_dir}/fig3_data.csv",
            ("kappa", "divergence", "seed", "nu_hat", "true_mean", "abs_error"),
            rows,
        ),
        write_json(
            f"{out_dir}/fig3_summary.json",
            {
                "mean_abs_error": {f"{k[0]:g}|{k[1]}": v for k, v in err_by.items()},
                "n_seeds": FIG3_N_SEEDS,
                "mc_samples": mc_n,
                "seed": seed,
            },
        ),
        plots.render_skew_errors(f"{out_dir}/fig3.png", plot_rows),
    ]
    return {"mean_errors": err_by, "files": files}


FIG4_TARGETS = (
    "student:5:0.5",
    "extfunnel:2:0.5",
    "crescent",
    "schools:centered",
    "schools:noncentered",
    "schools:marginalized",
)

FIG4_ITERS = {
    "student:5:0.5": 4000,
    "extfunnel:2:0.5": 8000,
    "crescent": 10000,
    "schools:centered": 8000,
    "schools:noncentered": 8000,
    "schools:marginalized": 6000,
}


def run_fig4(out_dir, seed: int = 0, budget: float = 1.0):
    """Scaled mean errors of reverse-KL fits across the target zoo,
    split into symmetric and asymmetric coordinate groups."""
    mean_rows, corr_rows = [], []
    fits = {}
    for spec in FIG4_TARGETS:
        target = from_spec(spec)
        fit = funnel_reverse_kl_fit(
            target,
            seed=seed,
            budget=budget,
            max_iters=int(FIG4_ITERS[spec] * budget),
            warm_start_iters=int(FIG4_ITERS[spec] * budget / 3),
        )
        report = accuracy(fit, target)
        fits[spec] = (fit, report)
        for i, group, err in report.mean_rows:
            mean_rows.append((spec, i, group, err))
        for i, j, group, err in report.corr_rows:
            corr_rows.append((spec, i, j, group, err))

    files = [
        write_csv(
            f"{out_dir}/fig4_mean_errors.csv",
            ("target", "coordinate", "group", "scaled_mean_error"),
            mean_rows,
        ),
        write_csv(
            f"{out_dir}/fig4_corr_errors.csv",
            ("target", "i", "j", "group", "correlation_error"),
            corr_rows,
        ),
        write_json(
            f"{out_dir}/fig4_summary.json",
            {
                spec: {
                    "converged": fit.converged,
                    **report.summary_dict(),
                }
                for spec, (fit, report) in fits.items()
            },
        ),
        plots.render_mean_errors(f"{out_dir}/fig4.png", mean_rows),
    ]
    return {"fits": fits, "files": files}


TABLE2_TARGETS = (
    "student:5:0.5",
    "extfunnel:2:0.5",
    "crescent",
    "schools:centered",
    "schools:noncentered",
    "schools:marginalized",
)


def run_table2(out_dir, seed: int = 0, budget: float = 1.0, reflection: str = "point"):
    """Reflection-asymmetry quantiles for the in-scope targets."""
    n = int(20000 * budget)
    rows = []
    reports = {}
    for spec in TABLE2_TARGETS:
        target = from_spec(spec)
        rep = asymmetry_row(target, n=n, seed=seed, reflection=reflection)
        reports[spec] = rep
        rows.append((spec, rep.q90, rep.n, rep.n_excluded))

    files = [
        write_csv(
            f"{out_dir}/table2_data.csv", ("target", "q90", "n", "n_excluded"), rows
        ),
        write_json(
            f"{out_dir}/table2_summary.json",
            {spec: rep.summary_dict() for spec, rep in reports.items()},
        ),
        plots.render_asymmetry(
            f"{out_dir}/table2.png", [(spec, rep.q90) for spec, rep in reports.items()]
        ),
    ]
    return {"reports": reports, "files": files}


FIGURES = {
    "fig1": run_fig1,
    "fig2": run_fig2,
    "fig3": run_fig3,
    "fig4": run_fig4,
    "table2": run_table2,
}


def run_figure(figure_id: str, out_dir, seed: int = 0, budget: float = 1.0):
    if figure_id not in FIGURES:
        raise UnknownFigure(
            f"unknown figure {figure_id!r}; expected one of {', '.join(sorted(FIGURES))}"
        )
    return FIGURES[figure_id](out_dir, seed=seed, budget=budget)
