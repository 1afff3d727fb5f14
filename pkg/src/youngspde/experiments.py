"""Experiment drivers that turn the well-posedness estimates into measured ratios.

Every experiment returns an :class:`ExperimentReport`: named metrics with
their estimator and sample size, and PASS/FAIL verdicts against thresholds
taken from :class:`Thresholds` (which the config file can override).
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .drivers import (RngStream, sample_bm_ensemble, sample_fbm, sample_fbm_ensemble,
                      smooth_bump)
from .errors import PreconditionError
from .paths import Grid, holder_seminorm, lm_mean, mixed_norms, solution_norms
from .sewing import accumulate, one_step_integrals, sewing_remainder_prefactor_multi
from .solver import (Coefficients, Nonlinearity, ProblemSpec, linear_mode_problem,
                     oracle_single_mode, solve_mild, torus_problem)
from .spectral import HeatSemigroup


@dataclass
class Thresholds:
    """Pass thresholds; defaults are the acceptance values."""

    continuity_band: tuple = (1.0 / 3.0, 3.0)
    growth_max: float = 2.0
    slope_min: float = 0.4
    chain_rel: float = 1e-3
    chain_fraction: float = 0.95
    oracle_rel: float = 1e-2
    rho_max: float = 0.9
    exact_floor: float = 1e-12


@dataclass
class Metric:
    name: str
    value: float
    estimator: str
    samples: int
    passed: bool | None = None


@dataclass
class ExperimentReport:
    experiment_id: str
    inputs_digest: str
    metrics: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def add(self, name, value, estimator, samples, passed=None):
        self.metrics.append(Metric(name, float(value), estimator, int(samples), passed))

    @property
    def passed(self):
        return all(m.passed for m in self.metrics if m.passed is not None)

    def summary_lines(self):
        out = []
        for mt in self.metrics:
            tag = "INFO" if mt.passed is None else ("PASS" if mt.passed else "FAIL")
            out.append(f"{tag} {self.experiment_id}.{mt.name} = {mt.value:.6g} "
                       f"[{mt.estimator}; n={mt.samples}]")
        return out

    def metrics_csv(self):
        rows = ["name,value,estimator,samples,passed"]
        for mt in self.metrics:
            rows.append(f"{mt.name},{mt.value:.17g},\"{mt.estimator}\",{mt.samples},"
                        f"{'' if mt.passed is None else int(mt.passed)}")
        return "\n".join(rows) + "\n"


def digest(*parts) -> str:
    h = hashlib.sha256()
    for p in parts:
        h.update(json.dumps(p, sort_keys=True, default=str).encode())
    return h.hexdigest()[:16]


def _pmap(fn, items, threads=1):
    items = list(items)
    if threads is None or threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _problem_digest(problem):
    return asdict(problem)


# ---------------------------------------------------------------------------
# continuity of the solution map


def _perturbation_field(problem, sg):
    if isinstance(sg, HeatSemigroup):
        return sg.mode_field((1,) + (0,) * (problem.n - 1), 1.0, problem.l)
    return sg.constant(1.0, problem.l)


def lipschitz_ratio(problem, grid, eta, W, xi, rho, semigroup, window_len=None, picard_tol=1e-12,
                    scheme="trapezoid"):
    """R(rho) = ||u - u_bar|| / (|d eta - d eta_bar|_alpha + ||xi - xi_bar||_{m,gamma}).

    u_bar is driven by eta + rho * bump and started at xi + rho * phi.
    """
    bump = smooth_bump(grid)[:, None] * np.ones((1, problem.e))
    phi = _perturbation_field(problem, semigroup)
    u = solve_mild(problem, eta, W, grid, window_len, picard_tol, xi=xi, scheme=scheme).u
    if rho == 0:
        return 0.0, u
    ub = solve_mild(problem, eta + rho * bump, W, grid, window_len, picard_tol, xi=xi + rho * phi,
                    scheme=scheme).u
    num = solution_norms(u - ub, grid, semigroup, problem.beta, problem.gamma, problem.m).e_beta_lm
    den = rho * holder_seminorm(bump, grid, problem.alpha) + float(
        lm_mean(semigroup.norm(rho * np.broadcast_to(phi, xi.shape), problem.gamma), problem.m))
    return num / den, u


def continuity_experiment(problem: ProblemSpec = None, rhos=(1e-1, 1e-2, 1e-3), M=20, level=8, seed=0,
                          H=None, thresholds: Thresholds = None, threads=1, window_len=None):
    """R(rho) and R(rho/2)/R(rho) for each rho; PASS when every ratio lies in the band."""
    problem = problem or torus_problem()
    th = thresholds or Thresholds()
    grid = Grid(problem.T, level)
    sg = problem.semigroup()
    H = problem.alpha + 0.05 if H is None else H
    eta = sample_fbm(H, grid, RngStream(seed, 0), problem.e).values
    W = sample_bm_ensemble(grid, seed, M, problem.d, first_index=1)
    xi = Coefficients(problem, sg).initial(M, seed)
    rep = ExperimentReport("continuity", digest(_problem_digest(problem), rhos, M, level, seed, H))
    scales = sorted({r for rho in rhos for r in (rho, rho / 2)}, reverse=True)
    R = dict(zip(scales, _pmap(lambda r: lipschitz_ratio(problem, grid, eta, W, xi, r, sg, window_len)[0],
                               scales, threads)))
    lo, hi = th.continuity_band
    for rho in rhos:
        rep.add(f"R[{rho:g}]", R[rho], "E^beta L_m solution-norm difference / input distance", M,
                bool(np.isfinite(R[rho])))
        q = R[rho / 2] / R[rho] if R[rho] > 0 else math.nan
        rep.add(f"R_ratio[{rho:g}]", q, "R(rho/2)/R(rho)", M, bool(lo <= q <= hi))
    rep.tables["R"] = [(r, R[r]) for r in scales]
    rep.notes.append("boundedness is certified on this configured family only")
    return rep


# ---------------------------------------------------------------------------
# spatial regularity


def _data_norm(problem, sg, xi):
    c = Coefficients(problem, sg)
    z = sg.zeros(problem.l, lead=(1,))
    parts = [float(lm_mean(sg.norm(xi, problem.gamma), problem.m))]
    parts.append(float(sg.norm(c.f(z), problem.gamma - problem.lam).max()))
    parts.append(float(sg.norm(c.h(z), problem.gamma - problem.mu).max()))
    parts.append(float(np.sqrt(np.sum(sg.norm(c.Y(z), problem.gamma - problem.nu) ** 2))))
    return sum(parts)


def regularity_profile(problem, grid, u, thetas, t_list, semigroup):
    """t^theta ||u_t||_{m, gamma+theta} at the grid nodes nearest to each t."""
    out = {}
    for th in thetas:
        vals = []
        for t in t_list:
            k = int(round(t / grid.dt))
            k = min(max(k, 1), grid.N)
            tk = k * grid.dt
            nrm = semigroup.norm(u[:, k], problem.gamma + th)
            vals.append(tk ** th * float(lm_mean(nrm, problem.m)))
        out[th] = np.array(vals)
    return out


def regularity_probe(problem: ProblemSpec = None, thetas=(0.2,), t_list=None, levels=(8, 12), M=20,
                     seed=0, H=None, thresholds: Thresholds = None, threads=1, xi=None):
    """C_level(theta) = max_t t^theta ||u_t||_{m,gamma+theta} / data norm; PASS when growth < threshold."""
    problem = problem or torus_problem()
    th = thresholds or Thresholds()
    cap = problem.regularity_cap
    for t in thetas:
        if not 0 <= t < cap:
            raise PreconditionError(
                f"θ must lie in [0, (1−λ)∧(1/2−μ)∧(α−ν)) = [0, {cap:g}), got θ = {t}")
    t_list = np.geomspace(0.01, problem.T, 9) if t_list is None else np.asarray(t_list, float)
    if np.any(t_list <= 0) or np.any(t_list > problem.T):
        raise PreconditionError("probe times must lie in (0, T]")
    H = problem.alpha + 0.05 if H is None else H
    sg = problem.semigroup()
    fine = Grid(problem.T, max(levels))
    eta_f = sample_fbm(H, fine, RngStream(seed, 0), problem.e).values
    W_f = sample_bm_ensemble(fine, seed, M, problem.d, first_index=1)
    xi0 = Coefficients(problem, sg).initial(M, seed) if xi is None else xi
    dnorm = _data_norm(problem, sg, xi0)

    def run(level):
        g = Grid(problem.T, level)
        s = fine.stride_to(g)
        u = solve_mild(problem, eta_f[::s], W_f[:, ::s], g, xi=xi0).u
        return regularity_profile(problem, g, u, thetas, t_list, sg)

    profiles = dict(zip(levels, _pmap(run, levels, threads)))
    rep = ExperimentReport("regularity", digest(_problem_digest(problem), list(thetas), list(t_list),
                                                list(levels), M, seed, H))
    for theta in thetas:
        C = {lv: float(profiles[lv][theta].max()) / dnorm for lv in levels}
        for lv in levels:
            rep.add(f"C[theta={theta:g},level={lv}]", C[lv], "max_t t^theta ||u_t||_{m,gamma+theta} / data norm", M,
                    bool(np.isfinite(C[lv])))
        growth = C[max(levels)] / C[min(levels)]
        rep.add(f"growth[theta={theta:g}]", growth, "C(finest)/C(coarsest)", M, bool(growth < th.growth_max))
        rep.tables[f"profile[theta={theta:g}]"] = [(float(t),) + tuple(float(profiles[lv][theta][i]) for lv in levels)
                                                   for i, t in enumerate(t_list)]
    return rep


# ---------------------------------------------------------------------------
# Kolmogorov upgrade


def kolmogorov_ratio(ensemble, grid, beta, theta, m, norm=None, eps=None, window=None):
    """||dY||_{m,theta} / (T^eps ||dY||_{beta,m}) with eps in (0, beta - 1/m - theta)."""
    if not (1.0 / beta < m < math.inf):
        raise PreconditionError(f"need 1/β < m < ∞, got β = {beta}, m = {m}")
    if not 0 < theta < beta - 1.0 / m:
        raise PreconditionError(f"θ must lie in (0, β − 1/m) = (0, {beta - 1 / m:g}), got θ = {theta}")
    eps = 0.5 * (beta - 1.0 / m - theta) if eps is None else eps
    path = mixed_norms(ensemble, grid, theta, m, norm, None, window).holder_of_lm
    lm = mixed_norms(ensemble, grid, beta, m, norm, None, window).lm_of_holder
    if lm == 0:
        return 0.0
    return path / (grid.T ** eps * lm)


def kolmogorov_check(ensemble, grid, beta, theta, m, norm=None, eps=None, window=None,
                     reference=None, thresholds: Thresholds = None):
    """Report the Kolmogorov ratio; with ``reference`` (a coarser-level ratio) also its growth."""
    th = thresholds or Thresholds()
    r = kolmogorov_ratio(ensemble, grid, beta, theta, m, norm, eps, window)
    rep = ExperimentReport("kolmogorov", digest(list(np.shape(ensemble)), beta, theta, m, grid.level))
    M = np.shape(ensemble)[0]
    rep.add("ratio", r, "||dY||_{m,theta} / (T^eps ||dY||_{beta,m})", M, bool(np.isfinite(r)))
    if reference is not None and reference > 0:
        rep.add("growth", r / reference, "ratio(level)/ratio(reference)", M, bool(r / reference < th.growth_max))
    return rep


def kolmogorov_experiment(levels=(8, 12), M=50, seed=0, beta=0.45, theta=0.3, m=8.0,
                          thresholds: Thresholds = None):
    """Brownian ensemble, ratio at each level and its growth across levels."""
    th = thresholds or Thresholds()
    fine = Grid(1.0, max(levels))
    B = sample_bm_ensemble(fine, seed, M)
    rep = ExperimentReport("kolmogorov", digest(list(levels), M, seed, beta, theta, m))
    ratios = {}
    for lv in levels:
        g = Grid(1.0, lv)
        ratios[lv] = kolmogorov_ratio(B[:, ::fine.stride_to(g)], g, beta, theta, m)
        rep.add(f"ratio[level={lv}]", ratios[lv], "||dY||_{m,theta} / (T^eps ||dY||_{beta,m})", M,
                bool(np.isfinite(ratios[lv])))
    growth = ratios[max(levels)] / ratios[min(levels)]
    rep.add("growth", growth, "ratio(finest)/ratio(coarsest)", M, bool(growth < th.growth_max))
    return rep


# ---------------------------------------------------------------------------
# convergence rates


@dataclass
class RateFit:
    slope: float
    residual: float
    status: str  # "fit" or "exact"
    dts: np.ndarray
    errors: np.ndarray


def fit_rate(dts, errors, floor=1e-12):
    dts = np.asarray(dts, float)
    errors = np.asarray(errors, float)
    if len(dts) < 3:
        raise PreconditionError("a rate fit needs at least 3 levels")
    if np.all(errors <= floor):
        return RateFit(math.inf, 0.0, "exact", dts, errors)
    x, y = np.log(dts), np.log(np.maximum(errors, 1e-300))
    coef, res, *_ = np.polyfit(x, y, 1, full=True)
    rms = float(np.sqrt(res[0] / len(x))) if len(res) else 0.0
    return RateFit(float(coef[0]), rms, "fit", dts, errors)


def _young_ode_errors(levels, seed, M, H, kappa, scheme):
    fine = Grid(1.0, max(levels))
    E = sample_fbm_ensemble(H, fine, seed, M)
    errs = []
    for lv in levels:
        g = Grid(1.0, lv)
        s = fine.stride_to(g)
        p = linear_mode_problem(kappa=kappa)
        e = []
        for i in range(M):
            eta = E[i, ::s]
            u = solve_mild(p, eta, grid=g, scheme=scheme).u[0, -1, 0, 0].real
            ex = oracle_single_mode("young_linear", {"times": g.times, "eta": eta, "kappa": kappa})[-1]
            e.append(abs(u - ex) / abs(ex))
        errs.append(float(np.mean(e)))
    return errs


def _chain_rule_errors(levels, seed, M, H, scheme):
    from .sewing import young_recursion
    from .spectral import identity_semigroup

    fine = Grid(1.0, max(levels))
    E = sample_fbm_ensemble(H, fine, seed, M)
    sg = identity_semigroup()
    errs = []
    for lv in levels:
        g = Grid(1.0, lv)
        s = fine.stride_to(g)
        e = []
        for i in range(M):
            eta = E[i, ::s]
            Z = young_recursion(eta[:, :, None], eta, sg, g, scheme)[-1, 0]
            ex = 0.5 * (eta[-1, 0] ** 2 - eta[0, 0] ** 2)
            e.append(abs(Z - ex) / abs(ex))
        errs.append(float(np.mean(e)))
    return errs


def _etd_errors(levels, kappa, c, scheme, f_kind):
    out = []
    for lv in levels:
        g = Grid(1.0, lv)
        if f_kind == "const":
            p = linear_mode_problem(kappa=kappa, xi=0.0, f=Nonlinearity("const", c=c), g0=0.0)
            ex = c * (1 - math.exp(-kappa)) / kappa if kappa else c
        else:
            p = linear_mode_problem(kappa=kappa, f=Nonlinearity("linear", a=-c), g0=0.0)
            ex = math.exp(-(kappa + c))
        u = solve_mild(p, np.zeros((g.N + 1, 1)), grid=g, scheme=scheme, picard_tol=1e-14).u[0, -1, 0, 0].real
        out.append(abs(u - ex) / max(abs(ex), 1e-300))
    return out


def _self_reference_errors(levels, problem, seed, M, H):
    fine = Grid(problem.T, max(levels))
    eta = sample_fbm(H, fine, RngStream(seed, 0), problem.e).values
    W = sample_bm_ensemble(fine, seed, M, problem.d, first_index=1)
    sg = problem.semigroup()
    xi = Coefficients(problem, sg).initial(M, seed)
    ref = solve_mild(problem, eta, W, fine, xi=xi).u[:, -1]
    errs = []
    for lv in levels[:-2]:
        g = Grid(problem.T, lv)
        s = fine.stride_to(g)
        u = solve_mild(problem, eta[::s], W[:, ::s], g, xi=xi).u[:, -1]
        errs.append(float(lm_mean(sg.norm(u - ref, problem.gamma), problem.m)))
    return errs


def convergence_study(target="young_ode", levels=tuple(range(6, 13)), oracle="closed_form", seed=0, M=5,
                      H=0.75, scheme="trapezoid", problem: ProblemSpec = None, thresholds: Thresholds = None,
                      kappa=1.0):
    """Errors against an oracle across levels and the log-log slope in dt.

    Targets: ``young_ode`` (single-mode Young equation), ``chain_rule``
    (int eta d eta), ``etd_const`` and ``etd_linear`` (deterministic
    convolution), ``problem`` (torus problem, self-reference only).
    With ``oracle="self"`` the finest level is the truth and the fit uses
    levels up to the finest minus 2.
    """
    th = thresholds or Thresholds()
    levels = list(levels)
    if len(levels) < 3:
        raise PreconditionError("convergence_study needs at least 3 levels")
    if oracle == "self" or target == "problem":
        if len(levels) < 5:
            raise PreconditionError("self-reference needs at least 5 levels (3 fitted)")
        errs = _self_reference_errors(levels, problem or torus_problem(), seed, M, H)
        fit_levels = levels[:-2]
    else:
        fit_levels = levels
        if target == "young_ode":
            errs = _young_ode_errors(levels, seed, M, H, kappa, scheme)
        elif target == "chain_rule":
            errs = _chain_rule_errors(levels, seed, M, H, scheme)
        elif target == "etd_const":
            errs = _etd_errors(levels, 2.0, 1.0, scheme, "const")
        elif target == "etd_linear":
            errs = _etd_errors(levels, kappa, 1.0, scheme, "linear")
        else:
            raise PreconditionError(f"unknown convergence target {target!r}")
    dts = [2.0 ** -lv for lv in fit_levels]
    fit = fit_rate(dts, errs, th.exact_floor)
    rep = ExperimentReport("rates", digest(target, levels, oracle, seed, M, H, scheme))
    for lv, e in zip(fit_levels, errs):
        rep.add(f"error[level={lv}]", e, f"mean relative error vs {oracle}", M)
    ok = fit.status == "exact" or fit.slope >= th.slope_min
    rep.add("slope", fit.slope, f"least-squares log-log slope ({fit.status})", len(errs), ok)
    rep.add("fit_residual", fit.residual, "rms of log-log residuals", len(errs))
    rep.tables["errors"] = list(zip(dts, errs))
    rep.notes.append(f"status={fit.status}")
    return rep


# ---------------------------------------------------------------------------
# sewing remainder and Picard contraction


def remainder_prefactors(problem: ProblemSpec = None, levels=(8, 12), thetas=(0.0, 0.2), M=4, seed=0, H=None):
    """Sewing remainder prefactor of the solver's Young convolution at each level.

    Y = G1 grad u + G0 u + g is taken from the solution at that level and Z
    is its Young convolution; the remainder is measured against the germ in
    H_{gamma-nu-beta+theta} with excess exponent eps = alpha + beta - 1.
    """
    problem = problem or torus_problem()
    H = problem.alpha + 0.05 if H is None else H
    sg = problem.semigroup()
    coef = Coefficients(problem, sg)
    fine = Grid(problem.T, max(levels))
    eta_f = sample_fbm(H, fine, RngStream(seed, 0), problem.e).values
    W_f = sample_bm_ensemble(fine, seed, M, problem.d, first_index=1)
    xi = coef.initial(M, seed)
    eps = problem.alpha + problem.beta - 1.0
    base = problem.gamma - problem.nu - problem.beta
    out = {}
    for lv in levels:
        g = Grid(problem.T, lv)
        s = fine.stride_to(g)
        eta = eta_f[::s]
        u = solve_mild(problem, eta, W_f[:, ::s], g, xi=xi).u
        Y = coef.Y(u)  # (M, N+1, e, l, modes)
        Yt = np.moveaxis(Y, 1, 0)
        Z = np.moveaxis(accumulate(sg.multiplier(g.dt), one_step_integrals(Yt, eta, sg, g.dt, nbatch=1)), 0, 1)
        out[lv] = sewing_remainder_prefactor_multi(Z, Y, eta, sg, g, base, thetas, eps, problem.m)
    return out


def sewing_remainder_experiment(problem=None, levels=(8, 12), thetas=(0.0, 0.2), M=4, seed=0,
                                thresholds: Thresholds = None):
    th = thresholds or Thresholds()
    res = remainder_prefactors(problem, levels, thetas, M, seed)
    rep = ExperimentReport("remainder", digest(list(levels), list(thetas), M, seed))
    lo, hi = min(levels), max(levels)
    for theta in thetas:
        for lv in levels:
            rep.add(f"C[theta={theta:g},level={lv}]", res[lv][theta].lm,
                    "sup_pairs L^m |hat-delta Z - A|_{base+theta} / |t-s|^{1+eps-theta}", M)
        growth = res[hi][theta].lm / res[lo][theta].lm
        rep.add(f"growth[theta={theta:g}]", growth, "C(finest)/C(coarsest)", M, bool(growth < th.growth_max))
    return rep


def contraction_study(problem: ProblemSpec = None, level=10, window_lens=None, M=8, seed=0, H=None,
                      thresholds: Thresholds = None):
    """rho_hat per window for a sequence of halved window lengths.

    PASS when every converged window has rho_hat <= rho_max and the largest
    rho_hat strictly decreases along the sequence.
    """
    problem = problem or torus_problem()
    th = thresholds or Thresholds()
    H = problem.alpha + 0.05 if H is None else H
    g = Grid(problem.T, level)
    window_lens = window_lens or [problem.T / 8 / 2 ** i for i in range(4)]
    eta = sample_fbm(H, g, RngStream(seed, 0), problem.e).values
    W = sample_bm_ensemble(g, seed, M, problem.d, first_index=1)
    xi = Coefficients(problem, problem.semigroup()).initial(M, seed)
    rep = ExperimentReport("contraction", digest(level, list(window_lens), M, seed, H))
    rhos = []
    for L in window_lens:
        tr = solve_mild(problem, eta, W, g, window_len=L, xi=xi, auto_halve=False, rho_max=th.rho_max)
        r = max(tr.rho_hat)
        rhos.append(r)
        rep.add(f"rho_hat[L={L:g}]", r, "max over windows of max_{i>=1} res_{i+1}/res_i", M,
                bool(all(x <= th.rho_max for x in tr.rho_hat)))
    mono = all(b < a for a, b in zip(rhos, rhos[1:]))
    rep.add("monotone", float(mono), "rho_hat strictly decreasing under halving", M, mono)
    rep.tables["rho_hat"] = list(zip(window_lens, rhos))
    return rep
