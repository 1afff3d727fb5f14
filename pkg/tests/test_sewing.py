import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad
from scipy.optimize import minimize_scalar

from youngspde.drivers import RngStream, deterministic_driver, sample_fbm, sample_fbm_ensemble
from youngspde.errors import GridMismatchError, PreconditionError, SewingDivergenceError
from youngspde.paths import Grid
from youngspde.sewing import (GermEvaluator, accumulate, compatibility_check, convolution_bound_probe,
                              mild_sewing, sewing_remainder_prefactor, window_integral, young_convolution,
                              young_recursion)
from youngspde.spectral import HeatSemigroup, identity_semigroup, single_mode

ID = identity_semigroup()


def scalar_path(v):
    """(N+1,) values as an identity-semigroup integrand with e = l = 1."""
    return np.asarray(v, float)[..., None, None]


def test_accumulate_matches_loop(rng):
    inc = rng.standard_normal((50, 3))
    decay = np.array([0.9, 0.5, 0.9])
    out = accumulate(decay, inc)
    ref = np.zeros((51, 3))
    for k in range(50):
        ref[k + 1] = decay * ref[k] + inc[k]
    np.testing.assert_allclose(out, ref, rtol=1e-13, atol=1e-14)


def test_zero_and_constant_integrands():
    g = Grid(1.0, 6)
    eta = sample_fbm(0.75, g, RngStream(0)).values
    assert not np.any(young_recursion(scalar_path(np.zeros(g.N + 1)), eta, ID, g))
    for scheme in ("trapezoid", "left"):
        Z = young_recursion(scalar_path(np.full(g.N + 1, 2.5)), eta, ID, g, scheme)[:, 0]
        np.testing.assert_allclose(Z, 2.5 * (eta[:, 0] - eta[0, 0]), atol=1e-13)


def test_single_mode_constant_integrand():
    # int_0^t e^{-kappa (t-r)} u0 dr = u0 (1 - e^{-kappa t}) / kappa
    kappa, u0 = 1.0, 1.7
    g = Grid(1.0, 10)
    Y = np.full((g.N + 1, 1, 1, 1), u0)
    exact = u0 * (1 - np.exp(-kappa * g.times)) / kappa
    for scheme in ("trapezoid", "left"):
        Z = young_recursion(Y, g.times, single_mode(kappa), g, scheme)[:, 0, 0]
        assert np.max(np.abs(Z[1:] - exact[1:]) / exact[1:]) < 1e-3


def test_young_chain_rule_trapezoid_is_exact():
    g = Grid(1.0, 10)
    eta = sample_fbm_ensemble(0.75, g, 2, 20)[:, :, 0]
    for path in eta:
        Z = young_recursion(scalar_path(path), path, ID, g)
        assert abs(Z[-1, 0] - 0.5 * path[-1] ** 2) <= 1e-12 * max(1.0, path[-1] ** 2)


@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 1000))
def test_bilinearity(a, b, seed):
    g = Grid(1.0, 5)
    sg = HeatSemigroup(1, 3)
    rng = np.random.default_rng(seed)
    Y1, Y2 = (sg.symmetrize(rng.standard_normal((g.N + 1, 1, 1, 7)) + 0j) for _ in range(2))
    e1, e2 = (np.cumsum(rng.standard_normal((g.N + 1, 1)), axis=0) for _ in range(2))
    lhs = young_recursion(a * Y1 + b * Y2, e1, sg, g)
    rhs = a * young_recursion(Y1, e1, sg, g) + b * young_recursion(Y2, e1, sg, g)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(1.0, np.max(np.abs(lhs)))
    lhs = young_recursion(Y1, a * e1 + b * e2, sg, g)
    rhs = a * young_recursion(Y1, e1, sg, g) + b * young_recursion(Y1, e2, sg, g)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(1.0, np.max(np.abs(lhs)))


def test_mild_additivity_of_window_integrals(rng):
    g = Grid(1.0, 7)
    sg = HeatSemigroup(1, 4)
    Y = sg.symmetrize(rng.standard_normal((g.N + 1, 1, 1, 9)) + 0j)
    eta = np.cumsum(rng.standard_normal((g.N + 1, 1)), axis=0) * 0.1
    for s, r, t in [(0, 40, 128), (5, 6, 7), (13, 77, 101)]:
        d = (window_integral(Y, eta, sg, g, s, t) - sg.apply((t - r) * g.dt, window_integral(Y, eta, sg, g, s, r))
             - window_integral(Y, eta, sg, g, r, t))
        assert np.max(np.abs(d)) < 1e-12


def test_dimension_mismatch():
    g = Grid(1.0, 4)
    with pytest.raises(GridMismatchError):
        young_recursion(np.zeros((g.N + 1, 2, 1)), np.zeros((g.N + 1, 1)), ID, g)
    with pytest.raises(GridMismatchError):
        young_recursion(np.zeros((g.N, 1, 1)), np.zeros((g.N, 1)), ID, g)


def test_sewing_additive_germ_is_exact(rng):
    g = Grid(1.0, 4)
    sg = HeatSemigroup(1, 3)
    L = 3
    fine = g.refine(L)
    P = sg.symmetrize(rng.standard_normal((fine.N + 1, 1, 7)) + 0j)
    germ = GermEvaluator(lambda s, t: P[t] - sg.apply((t - s) * fine.dt, P[s]))
    res = mild_sewing(germ, g, sg, L)
    expected = P[::1 << L] - sg.apply(g.times, np.broadcast_to(P[0], (g.N + 1,) + P[0].shape))
    assert np.max(np.abs(res.Z - expected)) < 1e-13
    assert res.converged and max(r["max_defect"] for r in res.defect_report) < 1e-13


def test_sewing_linear_germ():
    g = Grid(2.0, 3)
    germ = GermEvaluator(lambda s, t: ((t - s) * g.refine(2).dt * 0.6)[:, None])
    res = mild_sewing(germ, g, ID, 2)
    np.testing.assert_allclose(res.Z[:, 0], 0.6 * g.times, atol=1e-14)


def test_sewing_divergence_is_reported():
    g = Grid(1.0, 2)
    fine = g.refine(5)
    germ = GermEvaluator(lambda s, t: (((t - s) * fine.dt) ** 0.3)[:, None])
    with pytest.raises(SewingDivergenceError) as exc:
        mild_sewing(germ, g, ID, 5)
    assert exc.value.report and exc.value.report[-1]["ratio_to_prev"] > 1


def test_young_germ_level_decay():
    # the defect bound |t-s|^{1+eps} gives at least a 2^{-eps} decay per level, eps = 2H - 1 - 0.1
    g = Grid(1.0, 6)
    L = 5
    fine = g.refine(L)
    eta = sample_fbm(0.75, fine, RngStream(0)).values
    Y = sample_fbm_ensemble(0.75, fine, 1, 20)[:, :, :, None]
    res = young_convolution(Y, eta, ID, g, "left", L, tol=0.0)
    lm = [r["lm_defect"] for r in res.defect_report]
    slope = np.polyfit(np.arange(len(lm)), np.log2(lm), 1)[0]
    assert slope <= -(2 * 0.75 - 1 - 0.1)
    assert np.max(np.abs(res.Z - res.meta["recursion_at_nodes"])) < 2 * lm[-1] + 1e-3


def test_smooth_driver_matches_quadrature():
    # eta = sin, Y = cos: Z_1 = int_0^1 e^{-kappa (1-r)} cos(r)^2 dr
    kappa = 2.0
    ref = quad(lambda r: math.exp(-kappa * (1 - r)) * math.cos(r) ** 2, 0, 1, epsabs=1e-14)[0]
    levels = list(range(5, 10))
    # the left scheme is first order, so its fitted slope sits at 1 up to fit noise
    for scheme, floor in (("trapezoid", 1.0), ("left", 0.95)):
        errs = []
        for lv in levels:
            g = Grid(1.0, lv)
            eta = deterministic_driver("sine", {}, g).values
            Y = np.cos(g.times)[:, None, None, None]
            errs.append(abs(young_recursion(Y, eta, single_mode(kappa), g, scheme)[-1, 0, 0] - ref))
        assert -np.polyfit(levels, np.log2(errs), 1)[0] >= floor


def test_bound_probe_closed_form():
    # Y = 1, eta = t, one mode: ratio = sup_h (1 - e^{-kappa h}) / (kappa h^alpha)
    for kappa in (1.0, 10.0):
        sg = single_mode(kappa)
        g = Grid(1.0, 10)
        Y = np.ones((g.N + 1, 1, 1, 1))
        Z = young_recursion(Y, g.times, sg, g)
        br = convolution_bound_probe(Z, Y, g.times, sg, g, 0.75, 0.3, 0.0, 0.0)
        f = lambda h: -(1 - math.exp(-kappa * h)) / (kappa * h ** 0.75)
        ref = max(-minimize_scalar(f, bounds=(1e-9, 1.0), method="bounded").fun, -f(1.0))
        assert abs(br.ratio / ref - 1) < 0.1
    assert convolution_bound_probe(np.zeros((g.N + 1, 1, 1)), 0 * Y, g.times, sg, g, 0.75, 0.3, 0.0, 0.0).ratio == 0
    with pytest.raises(PreconditionError):
        convolution_bound_probe(Z, Y, g.times, sg, g, 0.75, 0.2, 0.0, 0.0)


def test_bound_probe_stable_under_refinement():
    sg = single_mode(5.0)
    fine = Grid(1.0, 12)
    eta = sample_fbm(0.8, fine, RngStream(0)).values
    Y = sample_fbm_ensemble(0.8, fine, 1, 4)[:, :, :, None, None]
    ratios = []
    for lv in (8, 10, 12):
        g = Grid(1.0, lv)
        s = fine.stride_to(g)
        Z = young_recursion(Y[:, ::s], eta[::s], sg, g)
        ratios.append(convolution_bound_probe(Z, Y[:, ::s], eta[::s], sg, g, 0.75, 0.3, 0.0, 0.2).ratio)
    assert max(ratios) / min(ratios) < 2.0


def test_compatibility_check():
    g = Grid(1.0, 6)
    fine = g.refine(4)
    eta = sample_fbm(0.75, fine, RngStream(0)).values
    single = scalar_path(np.sin(3 * fine.times))
    rep = compatibility_check(single, eta, ID, g)
    assert rep.discrepancy == 0.0 and rep.passed
    Y = sample_fbm_ensemble(0.75, fine, 1, 100)[:, :, :, None]
    rep = compatibility_check(Y, eta, ID, g)
    assert rep.passed
    perm = compatibility_check(Y[np.random.default_rng(0).permutation(100)], eta, ID, g)
    assert perm.discrepancy == pytest.approx(rep.discrepancy, rel=1e-12)


def test_remainder_prefactor_vanishes_for_constant_integrand():
    # Y = c, eta = t on one mode: the left germ has remainder O(h^2)
    sg = single_mode(2.0)
    g = Grid(1.0, 8)
    Y = np.full((g.N + 1, 1, 1, 1), 1.0)
    Z = young_recursion(Y, g.times, sg, g)
    rep = sewing_remainder_prefactor(Z, Y, g.times, sg, g, 0.0, 0.0, 0.05)
    assert rep.lm < 1.5 and rep.exponent == pytest.approx(1.05)
