"""The eleven acceptance criteria at their stated tolerances, one PASS/FAIL line each."""

import time

import numpy as np

from conftest import ACCEPTANCE_LINES
from youngspde.checks import (check_additivity, check_fbm_covariance, check_ou_variance, run_check_suite)
from youngspde.drivers import RngStream, sample_bm_ensemble, sample_fbm, sample_fbm_ensemble
from youngspde.experiments import (continuity_experiment, contraction_study, convergence_study,
                                   regularity_probe, remainder_prefactors)
from youngspde.paths import Grid
from youngspde.sewing import young_recursion
from youngspde.solver import Coefficients, linear_mode_problem, oracle_single_mode, solve_mild, torus_problem
from youngspde.spectral import identity_semigroup


def verdict(n, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_01_young_chain_rule():
    t0 = time.perf_counter()
    g = Grid(1.0, 12)
    E = sample_fbm_ensemble(0.75, g, 0, 100)
    rel = []
    for path in E:
        Z = young_recursion(path[:, :, None], path, identity_semigroup(), g)[-1, 0]
        ex = 0.5 * (path[-1, 0] ** 2 - path[0, 0] ** 2)
        rel.append(abs(Z - ex) / abs(ex))
    good = int(np.sum(np.array(rel) < 1e-3))
    dt = time.perf_counter() - t0
    verdict(1, good >= 95 and dt < 60,
            f"{good}/100 paths with relative error < 1e-3 (median {np.median(rel):.2e}), {dt:.1f} s")


def test_criterion_02_single_mode_oracle():
    t0 = time.perf_counter()
    g = Grid(1.0, 10)
    p = linear_mode_problem(kappa=1.0)
    errs = []
    for i in range(5):
        eta = sample_fbm(0.75, g, RngStream(0, i)).values
        u = solve_mild(p, eta, grid=g).u[0, -1, 0, 0].real
        ex = oracle_single_mode("young_linear", {"times": g.times, "eta": eta, "kappa": 1.0})[-1]
        errs.append(abs(u - ex) / abs(ex))
    rep = convergence_study("young_ode", levels=range(6, 13), M=5, H=0.75)
    slope = next(m for m in rep.metrics if m.name == "slope").value
    dt = time.perf_counter() - t0
    verdict(2, max(errs) < 1e-2 and slope >= 0.4 and dt < 120,
            f"max terminal error {max(errs):.2e} at N=2^10, slope {slope:.3f} over levels 6-12, {dt:.1f} s")


def test_criterion_03_mild_additivity():
    p = torus_problem()
    g = Grid(1.0, 8)
    eta = sample_fbm(0.8, g, RngStream(0)).values
    u = solve_mild(p, eta, sample_bm_ensemble(g, 0, 1, first_index=1), g).u[0]
    sg = p.semigroup()
    res = check_additivity(Coefficients(p, sg).Y(u), eta, sg, g, 1000, 0)
    verdict(3, res.passed, f"max |hat-delta Z|/max(1,|Z|_0) = {res.value:.2e} over 1000 triples")


def test_criterion_04_sewing_remainder():
    res = remainder_prefactors(torus_problem(), levels=(8, 12), thetas=(0.0, 0.2), M=4, seed=0)
    growth = {th: res[12][th].lm / res[8][th].lm for th in (0.0, 0.2)}
    path_growth = {th: res[12][th].pathwise / res[8][th].pathwise for th in (0.0, 0.2)}
    ok = all(v < 2 for v in growth.values()) and all(v < 2 for v in path_growth.values())
    verdict(4, ok, "prefactor growth level 8->12: " + ", ".join(
        f"theta={th:g}: {growth[th]:.3f} (pathwise {path_growth[th]:.3f})" for th in growth))


def test_criterion_05_fbm_covariance():
    res = check_fbm_covariance(M=10_000, seed=0, tol=5e-2)
    verdict(5, res.passed, f"max covariance error {res.value:.4f} on 8x8 grid, H in {{0.6, 0.75, 0.9}}")


def test_criterion_06_ou_variance():
    res = check_ou_variance(M=10_000, seed=0)
    verdict(6, res.passed, f"max |var - exact|/SE = {res.value:.2f} over modes and 5 times")


def test_criterion_07_picard_contraction():
    p = torus_problem()
    rep = contraction_study(p, level=10, window_lens=[1 / 8, 1 / 16, 1 / 32, 1 / 64], M=8, seed=0)
    rhos = [r for _, r in rep.tables["rho_hat"]]
    g = Grid(1.0, 10)
    tr = solve_mild(p, sample_fbm(0.8, g, RngStream(0)).values, sample_bm_ensemble(g, 0, 8, first_index=1), g)
    ok = rep.passed and max(tr.rho_hat) <= 0.9
    verdict(7, ok, "rho_hat " + ", ".join(f"{r:.3f}" for r in rhos)
            + f" for T/8..T/64; auto-halved run max {max(tr.rho_hat):.3f} ({tr.halvings} halvings)")


def test_criterion_08_continuity():
    rep = continuity_experiment(torus_problem(), rhos=(1e-1, 1e-2, 1e-3), M=20, level=8, seed=0)
    R = {m.name: m.value for m in rep.metrics}
    ratios = [v for k, v in R.items() if k.startswith("R_ratio")]
    verdict(8, rep.passed, "R(rho/2)/R(rho) = " + ", ".join(f"{q:.3f}" for q in ratios)
            + "; R = " + ", ".join(f"{v:.3f}" for k, v in R.items() if k.startswith("R[")))


def test_criterion_09_spatial_regularity():
    rep = regularity_probe(torus_problem(), thetas=(0.2,), t_list=np.geomspace(0.01, 1.0, 9), levels=(8, 12),
                           M=20, seed=0)
    g = next(m for m in rep.metrics if m.name.startswith("growth")).value
    verdict(9, rep.passed, f"max_t t^0.2 ||u_t||_(m,0.2) / data: growth level 8->12 = {g:.4f}")


def test_criterion_10_and_11_check_suite():
    results, elapsed = run_check_suite(seed=0)
    norms = [r for r in results if r.name.startswith("norms.")]
    verdict(10, all(r.passed for r in norms) and len(norms) == 4,
            f"{sum(r.passed for r in norms)}/{len(norms)} norm-order and equivalence checks")
    semi = [r for r in results if r.name.startswith("semigroup.")]
    verdict(11, all(r.passed for r in semi) and elapsed < 30,
            f"{sum(r.passed for r in semi)}/{len(semi)} semigroup checks, full suite {elapsed:.1f} s")
