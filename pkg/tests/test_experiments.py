import math

import numpy as np
import pytest

from youngspde.drivers import RngStream, sample_bm_ensemble, sample_fbm, smooth_bump
from youngspde.errors import PreconditionError, WindowDivergenceError
from youngspde.experiments import (Thresholds, continuity_experiment, contraction_study, convergence_study,
                                   fit_rate, kolmogorov_check, kolmogorov_experiment, kolmogorov_ratio,
                                   lipschitz_ratio, regularity_probe, regularity_profile)
from youngspde.paths import Grid, holder_seminorm, solution_norms
from youngspde.solver import Coefficients, InitialDatum, ProblemSpec, Drift, linear_mode_problem, torus_problem
from youngspde.spectral import one_mode_smoothing_constant, sup_weight_ratio


def test_lipschitz_ratio_zero_perturbation():
    p = linear_mode_problem(1.0)
    g = Grid(1.0, 6)
    eta = sample_fbm(0.8, g, RngStream(0)).values
    xi = Coefficients(p, p.semigroup()).initial(1)
    r, _ = lipschitz_ratio(p, g, eta, None, xi, 0.0, p.semigroup())
    assert r == 0.0


def test_lipschitz_ratio_first_order_oracle():
    # u = xi exp(-kappa t + eta_t); d/drho of u_bar at rho = 0 is u (phi / xi + bump)
    kappa, rho = 1.0, 1e-3
    p = linear_mode_problem(kappa)
    sg = p.semigroup()
    g = Grid(1.0, 9)
    eta = sample_fbm(0.8, g, RngStream(2)).values
    xi = Coefficients(p, sg).initial(1)
    R, _ = lipschitz_ratio(p, g, eta, None, xi, rho, sg)
    u = np.exp(-kappa * g.times + eta[:, 0])
    bump = smooth_bump(g)
    du = (rho * u * (1.0 + bump))[None, :, None, None] + 0j
    num = solution_norms(du, g, sg, p.beta, p.gamma, p.m).e_beta_lm
    den = rho * holder_seminorm(bump, g, p.alpha) + rho
    assert abs(R / (num / den) - 1) < 0.2


def test_continuity_experiment_small():
    rep = continuity_experiment(torus_problem(K=6), rhos=(1e-1, 1e-2), M=3, level=6)
    assert rep.passed
    vals = [m.value for m in rep.metrics if m.name.startswith("R[")]
    assert all(0 < v < 10 for v in vals)


def test_regularity_precondition_quotes_cap():
    with pytest.raises(PreconditionError, match="0.25"):
        regularity_probe(torus_problem(), thetas=(0.3,))


def test_regularity_heat_flow_only_smooth_datum():
    p = ProblemSpec(xi=InitialDatum("sine", 1.0, 2), drift=Drift(g0=(0.0,), g1=(0.0,), g=(0.0,)))
    sg = p.semigroup()
    g = Grid(1.0, 6)
    xi = Coefficients(p, sg).initial(1)
    u = sg.apply(g.times, np.broadcast_to(xi[:, None], (1, g.N + 1) + xi.shape[1:]))[None][0]
    prof = regularity_profile(p, g, u, [0.2], [0.01, 0.1, 1.0], sg)
    # t^theta |S_t xi|_{theta} <= |xi|_{theta} for t <= 1
    assert np.all(prof[0.2] <= float(sg.norm(xi[0], 0.2)) * (1 + 1e-12))


def test_regularity_rough_datum_against_one_mode_constant():
    p = ProblemSpec(K=32, xi=InitialDatum("rough", 1.0), drift=Drift(g0=(0.0,), g1=(0.0,), g=(0.0,)))
    sg = p.semigroup()
    g = Grid(1.0, 8)
    xi = Coefficients(p, sg).initial(1)
    u = sg.apply(g.times, np.broadcast_to(xi[:, None], (1, g.N + 1) + xi.shape[1:]))
    for theta in (0.1, 0.2):
        prof = regularity_profile(p, g, u, [theta], np.geomspace(0.01, 1, 9), sg)[theta]
        C = max(one_mode_smoothing_constant(theta) * sup_weight_ratio(sg, theta), 1.0)
        assert prof.max() <= C * float(sg.norm(xi[0], 0.0)) * (1 + 1e-12)


def test_regularity_probe_small():
    rep = regularity_probe(torus_problem(K=6), thetas=(0.2,), levels=(6, 8), M=3)
    assert rep.passed


def test_kolmogorov_deterministic_path_exact():
    # y = t on [0, 2]: |y|_theta = 2^{1-theta}, |y|_beta = 2^{1-beta}
    g = Grid(2.0, 6)
    y = g.times[None, :, None]
    beta, theta, m = 0.45, 0.2, 8.0
    eps = 0.5 * (beta - 1 / m - theta)
    assert kolmogorov_ratio(y, g, beta, theta, m) == pytest.approx(2.0 ** (beta - theta - eps), rel=1e-12)


def test_kolmogorov_scale_equivariance_and_errors():
    g = Grid(1.0, 7)
    B = sample_bm_ensemble(g, 0, 20)
    r = kolmogorov_ratio(B, g, 0.45, 0.3, 8.0)
    assert kolmogorov_ratio(2 * B, g, 0.45, 0.3, 8.0) == pytest.approx(r, rel=1e-12)
    with pytest.raises(PreconditionError):
        kolmogorov_ratio(B, g, 0.45, 0.3, 2.0)
    with pytest.raises(PreconditionError):
        kolmogorov_ratio(B, g, 0.45, 0.4, 8.0)
    assert kolmogorov_check(B, g, 0.45, 0.3, 8.0, reference=r).passed


def test_kolmogorov_experiment_is_reproducible():
    a = kolmogorov_experiment(levels=(6, 8), M=10, seed=3)
    b = kolmogorov_experiment(levels=(6, 8), M=10, seed=3)
    assert a.metrics_csv() == b.metrics_csv() and a.inputs_digest == b.inputs_digest
    assert a.passed


def test_fit_rate():
    dts = [2.0 ** -k for k in range(4, 9)]
    fit = fit_rate(dts, [3 * d ** 0.7 for d in dts])
    assert fit.slope == pytest.approx(0.7) and fit.status == "fit"
    assert fit_rate(dts, [1e-16] * 5).status == "exact"
    with pytest.raises(PreconditionError):
        fit_rate(dts[:2], [1.0, 0.5])


def test_convergence_study_targets():
    rep = convergence_study("etd_const", levels=(4, 6, 8))
    assert rep.passed and "status=exact" in rep.notes
    rep = convergence_study("chain_rule", levels=range(6, 11), M=5, scheme="left")
    slope = next(m for m in rep.metrics if m.name == "slope").value
    assert slope >= 2 * 0.75 - 1 - 0.1
    with pytest.raises(PreconditionError):
        convergence_study("young_ode", levels=(6, 7))
    with pytest.raises(PreconditionError):
        convergence_study("quartic", levels=(6, 7, 8))


def test_convergence_self_reference():
    rep = convergence_study("problem", levels=range(5, 10), M=2, problem=torus_problem(K=6), H=0.8)
    assert len(rep.tables["errors"]) == 3
    assert rep.passed


def test_contraction_study_small():
    rep = contraction_study(torus_problem(K=6), level=7, window_lens=[1 / 8, 1 / 16, 1 / 32], M=2)
    assert rep.passed
    rhos = [r for _, r in rep.tables["rho_hat"]]
    assert all(b < a for a, b in zip(rhos, rhos[1:]))


def test_thresholds_are_configurable():
    rep = kolmogorov_experiment(levels=(6, 8), M=10, seed=3, thresholds=Thresholds(growth_max=0.5))
    assert not rep.passed
    with pytest.raises(WindowDivergenceError):
        contraction_study(torus_problem(K=6), level=7, window_lens=[1 / 8], M=2, thresholds=Thresholds(rho_max=1e-6))
