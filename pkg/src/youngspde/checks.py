"""The invariant suite run by ``youngspde check``.

Each check returns a :class:`CheckResult`; the suite covers the semigroup
identities, the norm-order inequality and norm-equivalence band on
generated ensembles, mild additivity of the Young recursion, the fBm
covariance, the Ornstein-Uhlenbeck variance and a zero-coefficient solve.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .drivers import RngStream, fbm_covariance, sample_bm_ensemble, sample_fbm, sample_fbm_ensemble
from .paths import Grid, mixed_norms, norm_equivalence_ratio
from .sewing import window_integral, young_recursion
from .solver import (Coefficients, Drift, Nonlinearity, oracle_single_mode, solve_mild,
                     stochastic_convolution)
from .spectral import HeatSemigroup, one_mode_smoothing_constant


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    detail: str = ""

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'} {self.name} = {self.value:.6g} ({self.detail})"


def _rel(a, b):
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))


def check_semigroup(seed=0):
    rng = RngStream(seed, 7).generator()
    sg = HeatSemigroup(n=1, K=16, mass=0.0)
    u = sg.random_field(rng, 2, 0.5)
    out = []
    err = _rel(sg.apply(0.0, u), u)
    out.append(CheckResult("semigroup.identity_at_zero", err == 0.0, err, "max |S_0 u - u|"))
    s, t = 0.013, 0.071
    err = _rel(sg.apply(t, sg.apply(s, u)), sg.apply(s + t, u))
    out.append(CheckResult("semigroup.law", err < 1e-13, err, "|S_t S_s u - S_{t+s} u|, tol 1e-13"))
    sgm = HeatSemigroup(n=2, K=6, mass=1.0)
    v = sgm.random_field(rng, 1, 0.5)
    err = _rel(sgm.frac_power(-0.37, sgm.frac_power(0.37, v)), v)
    out.append(CheckResult("semigroup.frac_power_inverse", err < 1e-12, err,
                           "|(-L)^-g (-L)^g u - u| with m0 = 1, tol 1e-12"))
    phys = sg.synthesize(u)
    err = abs(float(np.sqrt(np.mean(phys ** 2, axis=-1).sum())) - float(sg.norm(u, 0.0))) / float(sg.norm(u, 0.0))
    out.append(CheckResult("semigroup.parseval", err < 1e-12, err, "|u|_0 against the physical L^2 mean"))
    t_list = np.geomspace(1e-4, 1.0, 400)
    worst = 0.0
    for theta in (0.1, 0.25, 0.5):
        probe = sg.smoothing_constant_probe(0.0, theta, t_list, weights="generator")
        worst = max(worst, abs(probe / one_mode_smoothing_constant(theta) - 1.0))
    out.append(CheckResult("semigroup.smoothing_constant", worst < 0.05, worst,
                           "relative gap to (theta/e)^theta, theta in {0.1, 0.25, 0.5}, tol 5%"))
    return out


def check_norms(ensembles, beta=0.3, gamma=0.0, m=2.0):
    """Norm-order inequality and equivalence band on every (name, ensemble, grid, semigroup)."""
    out = []
    for name, ens, grid, sg in ensembles:
        norm = sg.norm_fn(gamma - beta) if sg is not None else None
        mn = mixed_norms(ens, grid, beta, m, norm)
        ok = mn.holder_of_lm >= mn.lm_of_holder * (1 - 1e-12)
        out.append(CheckResult(f"norms.order[{name}]", ok, mn.holder_of_lm / max(mn.lm_of_holder, 1e-300),
                               "L_m E^beta / E^beta L_m >= 1"))
        if sg is not None:
            r = norm_equivalence_ratio(ens, grid, sg, beta, gamma, m)
            out.append(CheckResult(f"norms.equivalence[{name}]", 0.5 <= r <= 2.0, r,
                                   "mild / plain E^beta norm in [1/2, 2]"))
    return out


def check_additivity(Y, eta, sg, grid, n_triples=1000, seed=0, scheme="trapezoid"):
    """|hat-delta I_{s,r,t}| / max(1, |Z|_0) on random node triples, I the restarted recursion."""
    Z = young_recursion(Y, eta, sg, grid, scheme)
    zsup = max(1.0, float(np.max(sg.norm(Z, 0.0))))
    rng = RngStream(seed, 11).generator()
    worst = 0.0
    for _ in range(n_triples):
        s, r, t = np.sort(rng.choice(grid.N + 1, 3, replace=False))
        I_st = window_integral(Y, eta, sg, grid, s, t, scheme)
        I_sr = window_integral(Y, eta, sg, grid, s, r, scheme)
        I_rt = window_integral(Y, eta, sg, grid, r, t, scheme)
        d = I_st - sg.apply((t - r) * grid.dt, I_sr) - I_rt
        worst = max(worst, float(np.max(sg.norm(d, 0.0))) / zsup)
    return CheckResult("sewing.mild_additivity", worst < 1e-12, worst,
                       f"{n_triples} random node triples, tol 1e-12")


def check_fbm_covariance(M=10_000, seed=0, tol=5e-2):
    g = Grid(1.0, 3)
    t = g.times[1:]
    worst = 0.0
    for H in (0.6, 0.75, 0.9):
        X = sample_fbm_ensemble(H, g, seed, M)[:, 1:, 0]
        emp = X.T @ X / M
        worst = max(worst, float(np.max(np.abs(emp - fbm_covariance(t[:, None], t[None, :], H)))))
    return CheckResult("drivers.fbm_covariance", worst < tol, worst,
                       f"8x8 grid, M={M}, H in {{0.6, 0.75, 0.9}}, tol {tol}")


def check_ou_variance(M=10_000, seed=0, sigma=0.7):
    sg = HeatSemigroup(n=1, K=3)
    g = Grid(1.0, 6)
    W = sample_bm_ensemble(g, seed, M)
    # sigma on every mode so each generator value q is tested
    hv = np.broadcast_to(sigma * np.ones((1,) + sg.mode_shape, complex), (M, g.N + 1, 1) + sg.mode_shape)
    Hc = stochastic_convolution(hv, W, sg, g)
    worst = 0.0
    for k in (8, 16, 32, 48, 64):
        x = Hc[:, k, 0].real
        var = x.var(axis=0, ddof=1)
        se = var * math.sqrt(2.0 / (M - 1))
        ex = np.array([oracle_single_mode("ou", {"times": np.array([g.times[k]]), "kappa": q, "sigma": sigma})[1][0]
                       for q in sg.q.ravel()])
        worst = max(worst, float(np.max(np.abs(var - ex) / se)))
    return CheckResult("solver.ou_variance", worst < 3.0, worst,
                       f"max |var - exact| / SE over modes and 5 times, M={M}, tol 3")


def check_zero_coefficients(seed=0):
    from .solver import InitialDatum, ProblemSpec

    p = ProblemSpec(xi=InitialDatum("sine", 1.0, 2), f=Nonlinearity(), h=Nonlinearity(),
                    drift=Drift(g0=(0.0,), g1=(0.0,), g=(0.0,))).validate()
    g = Grid(1.0, 6)
    sg = p.semigroup()
    eta = sample_fbm(0.8, g, RngStream(seed)).values
    u = solve_mild(p, eta, grid=g).u[0]
    xi = Coefficients(p, sg).initial(1)[0]
    err = _rel(u, sg.apply(g.times, np.broadcast_to(xi, u.shape)))
    return CheckResult("solver.heat_flow_only", err < 1e-14, err, "u_t = S_t xi with all coefficients zero")


def run_check_suite(cfg=None, seed=0):
    """All invariant checks; returns (results, elapsed seconds)."""
    from .solver import torus_problem

    t0 = time.perf_counter()
    results = []
    results += check_semigroup(seed)
    problem = cfg.problem if cfg is not None else torus_problem()
    if problem.space != "torus":
        problem = torus_problem()
    g = Grid(problem.T, 8)
    sg = problem.semigroup()
    M = 16
    H = problem.alpha + 0.05
    eta = sample_fbm(H, g, RngStream(seed, 0), problem.e).values
    W = sample_bm_ensemble(g, seed, M, problem.d, first_index=1)
    traj = solve_mild(problem, eta, W, g, seed=seed)
    fb = sample_fbm_ensemble(H, g, seed + 1, 32)
    bm = sample_bm_ensemble(g, seed + 2, 32)
    results += check_norms([("fbm", fb, g, None), ("bm", bm, g, None), ("solution", traj.u, g, sg)],
                           problem.beta, problem.gamma, problem.m)
    Y = Coefficients(problem, sg).Y(traj.u[0])
    results.append(check_additivity(Y, eta, sg, g, 1000, seed))
    results.append(check_fbm_covariance(seed=seed))
    results.append(check_ou_variance(seed=seed))
    results.append(check_zero_coefficients(seed))
    return results, time.perf_counter() - t0
