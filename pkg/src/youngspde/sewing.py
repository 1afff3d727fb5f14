"""Mild sewing and the Young convolution integral Z = int_0^. S_{.-r} Y_r d eta_r.

Two constructions are provided:

* :func:`mild_sewing` evaluates the semigroup-twisted Riemann sums
  sum_{[r,v]} S_{t-v} A_{r,v} over dyadic partitions, level by level, and
  reports how fast successive levels approach each other. This is the
  verifier.
* :func:`young_recursion` builds Z node by node,
  Z_{k+1} = S_dt Z_k + I_k, with I_k the one-step integral. This is what the
  solver uses.

The one-step integral comes in two flavours. ``"left"`` is the germ
S_dt Y_k d eta_k itself. ``"trapezoid"`` is (S_dt Y_k + Y_{k+1}) d eta_k / 2,
which differs from the left germ by (hat-delta Y_{k,k+1}) d eta_k / 2 =
O(dt^{alpha+beta}) = o(dt) and therefore sews to the same integral; it is
exact for the chain rule int eta d eta and is the default.

Array convention: a single path is ``(N+1, *field)`` and an integrand
``(N+1, e, *field)``; ensembles prepend a member axis. Drivers are
``(N+1, e)`` and shared by all members.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.signal import lfilter

from .errors import GridMismatchError, PreconditionError, SewingDivergenceError
from .paths import Grid, euclidean, lm_mean, mixed_norms

SCHEMES = ("trapezoid", "left")


def accumulate(decay, incr):
    """Z_0 = 0, Z_{k+1} = decay * Z_k + incr_k along axis 0.

    ``decay`` broadcasts against the trailing axes of ``incr``; columns that
    share a decay value are filtered together.
    """
    incr = np.asarray(incr)
    n = incr.shape[0]
    rest = incr.shape[1:]
    decay = np.broadcast_to(np.asarray(decay), rest).ravel()
    flat = incr.reshape(n, -1)
    out = np.zeros((n + 1, flat.shape[1]), dtype=np.result_type(flat, decay))
    for a in np.unique(decay):
        cols = decay == a
        out[1:, cols] = lfilter([1.0], [1.0, -a], flat[:, cols], axis=0)
    return out.reshape((n + 1,) + rest)


def _to_time_first(x, single_ndim):
    """Return (array with time axis first, number of batch axes)."""
    x = np.asarray(x)
    if x.ndim == single_ndim:
        return x, 0
    if x.ndim == single_ndim + 1:
        return np.moveaxis(x, 1, 0), 1
    raise GridMismatchError(f"expected a path with {single_ndim} axes (or an ensemble), got shape {x.shape}")


def _from_time_first(x, nbatch):
    return np.moveaxis(x, 0, 1) if nbatch else x


def _driver_values(eta):
    vals = getattr(eta, "values", eta)
    vals = np.asarray(vals, dtype=float)
    return vals[:, None] if vals.ndim == 1 else vals


def _eta_increments(eta_vals, nbatch, field_ndim):
    d = np.diff(eta_vals, axis=0)
    return d.reshape((d.shape[0],) + (1,) * nbatch + (d.shape[1],) + (1,) * field_ndim)


def one_step_integrals(Yt, eta_vals, semigroup, dt, scheme="trapezoid", nbatch=0):
    """I_k approximating int_{t_k}^{t_{k+1}} S_{t_{k+1}-r} Y_r d eta_r, shape (N, *batch, *field)."""
    if scheme not in SCHEMES:
        raise PreconditionError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    fd = semigroup.field_ndim
    if eta_vals.shape[0] != Yt.shape[0]:
        raise GridMismatchError(f"integrand has {Yt.shape[0]} nodes, driver has {eta_vals.shape[0]}")
    if Yt.shape[1 + nbatch] != eta_vals.shape[1]:
        raise GridMismatchError(
            f"integrand has e={Yt.shape[1 + nbatch]} components, driver has e={eta_vals.shape[1]}"
        )
    deta = _eta_increments(eta_vals, nbatch, fd)
    left = semigroup.apply(dt, Yt[:-1])
    if scheme == "left":
        y = left
    else:
        y = 0.5 * (left + Yt[1:])
    return np.sum(y * deta, axis=1 + nbatch)


def young_recursion(Y, eta, semigroup, grid: Grid, scheme="trapezoid"):
    """Z on ``grid`` by Z_{k+1} = S_dt Z_k + I_k; Z_0 = 0."""
    Yt, nb = _to_time_first(Y, 2 + semigroup.field_ndim)
    if Yt.shape[0] != grid.N + 1:
        raise GridMismatchError(f"integrand has {Yt.shape[0]} nodes, grid has {grid.N + 1}")
    inc = one_step_integrals(Yt, _driver_values(eta), semigroup, grid.dt, scheme, nb)
    Z = accumulate(semigroup.multiplier(grid.dt), inc)
    return _from_time_first(Z, nb)


@dataclass
class GermEvaluator:
    """A germ A_{s,t} evaluated on (vectors of) finest-grid index pairs.

    ``callback(s, t)`` returns an array with a leading pair axis.
    ``alpha`` is the declared Hoelder exponent of A and ``eps`` the excess
    exponent of the defect, |Lambda_{s,r,t}| <= K |t-s| |t-r|^eps.
    """

    callback: Callable[[np.ndarray, np.ndarray], np.ndarray]
    alpha: float = 1.0
    eps: float = 0.0
    factorization_checked: bool = False


@dataclass
class SewingResult:
    Z: np.ndarray
    defect_report: list
    levels_used: int
    converged: bool
    recursion: Optional[np.ndarray] = None
    level_differences: Optional[np.ndarray] = None  # (levels, *batch) pathwise sups
    best_effort: bool = False
    meta: dict = field(default_factory=dict)

    def report_rows(self):
        return [(r["level"], r["max_defect"], r["ratio_to_prev"]) for r in self.defect_report]


def mild_sewing(germ: GermEvaluator, grid: Grid, semigroup, refine_levels=4, tol=1e-8,
                gamma=0.0, m=2.0, nbatch=0, divergence_slack=0.0):
    """Sew ``germ`` over dyadic refinements of ``grid``.

    Level l uses the partition with N * 2^l intervals; the germ is evaluated
    on indices of the finest grid ``grid.refine(refine_levels)``. The result
    at coarse node t_j is the level-``refine_levels`` sum. ``nbatch`` counts
    member axes sitting between the pair axis and the field axes of the
    germ's output.
    """
    L = int(refine_levels)
    fine = grid.refine(L)
    dt = fine.dt
    norm = semigroup.norm_fn(gamma)
    levels = []
    for lev in range(L + 1):
        h = 1 << (L - lev)
        r = np.arange(0, fine.N, h)
        A = germ.callback(r, r + h)
        J = accumulate(semigroup.multiplier(h * dt), A)
        levels.append(J[:: 1 << lev])
    diffs = []
    report = []
    prev = None
    for lev in range(1, L + 1):
        nrm = norm(levels[lev] - levels[lev - 1])  # (N+1, *batch)
        per_member = np.max(nrm, axis=0)
        diffs.append(per_member)
        d_max = float(np.max(per_member))
        d_lm = float(lm_mean(np.ravel(per_member), m)) if np.ndim(per_member) else d_max
        ratio = (d_max / prev) if prev not in (None, 0.0) else math.nan
        report.append({"level": lev, "max_defect": d_max, "lm_defect": d_lm, "ratio_to_prev": ratio})
        prev = d_max
    converged = bool(report) and report[-1]["max_defect"] < tol
    if len(report) >= 3 and not converged:
        last = [r["ratio_to_prev"] for r in report[-2:]]
        if all(np.isfinite(last)) and min(last) > 1.0 + divergence_slack:
            raise SewingDivergenceError(
                "successive sewing levels do not decay", report=report
            )
    Z = _from_time_first(levels[-1], nbatch)
    return SewingResult(Z, report, L, converged,
                        level_differences=np.array(diffs) if diffs else None,
                        best_effort=not germ.factorization_checked)


def young_germ(Y_fine, eta_fine, semigroup, fine: Grid) -> tuple:
    """The germ A_{s,t} = S_{t-s} Y_s d eta_{s,t} on the finest grid.

    Returns (GermEvaluator, number of batch axes).
    """
    Yt, nb = _to_time_first(Y_fine, 2 + semigroup.field_ndim)
    eta_vals = _driver_values(eta_fine)
    if Yt.shape[0] != fine.N + 1 or eta_vals.shape[0] != fine.N + 1:
        raise GridMismatchError("integrand and driver must be sampled at the finest level")
    fd = semigroup.field_ndim

    def callback(s, t):
        tau = (t - s) * fine.dt
        SY = semigroup.apply(tau, Yt[s])
        deta = (eta_vals[t] - eta_vals[s]).reshape((len(s),) + (1,) * nb + (eta_vals.shape[1],) + (1,) * fd)
        return np.sum(SY * deta, axis=1 + nb)

    # the Young germ factorises exactly: hat-delta A_{s,r,t} = -S_{t-r} hat-delta Y_{s,r} d eta_{r,t}
    return GermEvaluator(callback, factorization_checked=True), nb


def young_convolution(Y, eta, semigroup, grid: Grid, scheme="trapezoid", refine_levels=0,
                      tol=1e-8, gamma=0.0, m=2.0):
    """Young convolution of Y against eta reported on the nodes of ``grid``.

    ``Y`` and ``eta`` are sampled on ``grid.refine(refine_levels)``. The
    fast recursion is always built at that finest level (``recursion``);
    with ``refine_levels > 0`` the left-point germ is also sewn level by
    level and the defect report records the successive-level differences.
    ``Z`` is the sewn value when sewing ran and the recursion otherwise.
    """
    fine = grid.refine(refine_levels)
    rec = young_recursion(Y, eta, semigroup, fine, scheme)
    stride = 1 << refine_levels
    rt, nb = _to_time_first(rec, 1 + semigroup.field_ndim)
    rec_coarse = _from_time_first(rt[::stride], nb)
    if refine_levels == 0:
        return SewingResult(rec_coarse, [], 0, False, recursion=rec, meta={"scheme": scheme})
    germ, nb = young_germ(Y, eta, semigroup, fine)
    res = mild_sewing(germ, grid, semigroup, refine_levels, tol, gamma, m, nbatch=nb)
    res.recursion = rec
    res.meta["scheme"] = scheme
    res.meta["recursion_at_nodes"] = rec_coarse
    return res


# ---------------------------------------------------------------------------
# probes


def window_integral(Y, eta, semigroup, grid: Grid, s_idx, t_idx, scheme="trapezoid"):
    """int_s^t S_{t-r} Y_r d eta_r by a recursion started afresh at s."""
    Yt, nb = _to_time_first(Y, 2 + semigroup.field_ndim)
    eta_vals = _driver_values(eta)
    if s_idx == t_idx:
        return np.zeros_like(Yt[0].sum(axis=nb)) if nb == 0 else np.zeros_like(Yt[0][:, 0])
    inc = one_step_integrals(Yt[s_idx:t_idx + 1], eta_vals[s_idx:t_idx + 1], semigroup, grid.dt, scheme, nb)
    return accumulate(semigroup.multiplier(grid.dt), inc)[-1]


def _with_members(x, single_ndim):
    x = np.asarray(x)
    return x[None] if x.ndim == single_ndim else x


def _hs_norm(semigroup, gamma):
    """Hilbert-Schmidt norm on H_gamma^e: field norm, then Euclidean over e."""
    return lambda x: np.sqrt(np.sum(semigroup.norm(x, gamma) ** 2, axis=-1))


@dataclass
class RemainderReport:
    lm: float       # sup over pairs of the L^m norm over members
    pathwise: float  # max over members of the pathwise sup
    exponent: float
    argmax_lag: int


def sewing_remainder_prefactor_multi(Z, Y, eta, semigroup, grid: Grid, base_gamma, thetas, eps,
                                     m=2.0, window=None):
    """Remainder prefactors for several theta in one pass over lags; dict theta -> RemainderReport."""
    fd = semigroup.field_ndim
    Z = _with_members(Z, 1 + fd)
    Y = _with_members(Y, 2 + fd)
    eta_vals = _driver_values(eta)
    if Z.shape[1] != grid.N + 1 or Y.shape[1] != grid.N + 1:
        raise GridMismatchError("Z and Y must live on the grid")
    thetas = list(thetas)
    best = {th: [0.0, 0.0, 0] for th in thetas}
    upper = grid.N if window is None else min(grid.N, int(window))
    for d in range(1, upper + 1):
        tau = d * grid.dt
        deta = (eta_vals[d:] - eta_vals[:-d]).reshape((1, grid.N + 1 - d, eta_vals.shape[1]) + (1,) * fd)
        A = np.sum(semigroup.apply(tau, Y[:, :-d]) * deta, axis=2)
        R = Z[:, d:] - semigroup.apply(tau, Z[:, :-d]) - A
        for th in thetas:
            nrm = semigroup.norm(R, base_gamma + th)
            scale = tau ** (1.0 + eps - th)
            v = float(np.max(lm_mean(nrm, m, axis=0))) / scale
            b = best[th]
            if v > b[0]:
                b[0], b[2] = v, d
            b[1] = max(b[1], float(nrm.max()) / scale)
    return {th: RemainderReport(b[0], b[1], 1.0 + eps - th, b[2]) for th, b in best.items()}


def sewing_remainder_prefactor(Z, Y, eta, semigroup, grid: Grid, base_gamma, theta, eps,
                               m=2.0, window=None):
    """sup_{s<t} |hat-delta Z_{s,t} - S_{t-s} Y_s d eta_{s,t}|_{base+theta} / |t-s|^{1+eps-theta}."""
    return sewing_remainder_prefactor_multi(Z, Y, eta, semigroup, grid, base_gamma, [theta], eps,
                                            m, window)[theta]


def _check_exponents(alpha, beta, theta):
    if not 1.0 - alpha < beta < alpha:
        raise PreconditionError(f"beta must lie in (1-alpha, alpha) = ({1 - alpha}, {alpha}), got {beta}")
    if not 0.0 <= theta < alpha:
        raise PreconditionError(f"theta must lie in [0, alpha), got {theta}")


@dataclass
class BoundReport:
    lm_ratio: float
    pathwise_ratio: float

    @property
    def ratio(self):
        return max(self.lm_ratio, self.pathwise_ratio)


def convolution_bound_probe(Z, Y, eta, semigroup, grid: Grid, alpha, beta, gamma, theta,
                            m=2.0, eta_holder=None, window=None):
    """Empirical prefactor of ||hat-delta Z||_{alpha-theta, m, gamma+theta} <= C ||Y|| |d eta|_alpha.

    Reported for both orders of the mixed norms; ``Y == 0`` gives 0.
    """
    from .paths import holder_seminorm  # local to keep the import graph flat

    _check_exponents(alpha, beta, theta)
    fd = semigroup.field_ndim
    Z = _with_members(Z, 1 + fd)
    Y = _with_members(Y, 2 + fd)
    eta_vals = _driver_values(eta)
    if not np.any(Y):
        return BoundReport(0.0, 0.0)
    num = mixed_norms(Z, grid, alpha - theta, m, semigroup.norm_fn(gamma + theta), semigroup, window)
    ynorm_h = mixed_norms(Y, grid, beta, m, _hs_norm(semigroup, gamma - beta), None, window)
    ysup = _hs_norm(semigroup, gamma)(Y)  # (M, N+1)
    y_e = ynorm_h.lm_of_holder + float(np.max(lm_mean(ysup, m, axis=0)))
    y_l = ynorm_h.holder_of_lm + float(lm_mean(ysup.max(axis=1), m))
    h = holder_seminorm(eta_vals, grid, alpha) if eta_holder is None else eta_holder
    if h == 0:
        return BoundReport(0.0, 0.0)
    return BoundReport(num.lm_of_holder / (y_e * h), num.holder_of_lm / (y_l * h))


@dataclass
class CompatibilityReport:
    residual_lm: float
    residual_pathwise: float
    tol: float

    @property
    def max_residual(self):
        return max(self.residual_lm, self.residual_pathwise)

    @property
    def discrepancy(self):
        return abs(self.residual_pathwise - self.residual_lm)

    @property
    def passed(self):
        return self.residual_lm < self.tol and self.residual_pathwise < self.tol


def compatibility_check(Y, eta, semigroup, grid: Grid, m=2.0, refine_levels=4, tol=1e-2, gamma=0.0):
    """Run the sewing once and judge its last level difference in both norm orders.

    The L^m criterion takes sup over nodes of the empirical L^m norm; the
    pathwise criterion takes the maximum over members of the pathwise sup.
    """
    res = young_convolution(Y, eta, semigroup, grid, "left", refine_levels, tol=0.0, gamma=gamma, m=m)
    last = np.atleast_1d(res.level_differences[-1]).ravel()
    fine = grid.refine(refine_levels)
    # the L^m version of the last difference, node by node
    germ, nb = young_germ(Y, eta, semigroup, fine)
    L = refine_levels
    r1 = np.arange(0, fine.N, 1)
    r2 = np.arange(0, fine.N, 2)
    J1 = accumulate(semigroup.multiplier(fine.dt), germ.callback(r1, r1 + 1))[:: 1 << L]
    J2 = accumulate(semigroup.multiplier(2 * fine.dt), germ.callback(r2, r2 + 2))[:: 1 << (L - 1)]
    nrm = semigroup.norm(J1 - J2, gamma)  # (N+1, *batch)
    if nb:
        lm = float(np.max(lm_mean(nrm, m, axis=1)))
    else:
        lm = float(np.max(nrm))
    return CompatibilityReport(lm, float(np.max(last)), tol)
