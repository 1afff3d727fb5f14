"""Mild solutions of du = [L u + f(u)] dt + Y(u) d eta + h(u) dW by windowed Picard iteration.

The fixed-point map is Phi(u) = S xi + F(u) + Z(u) + H(u):

* F: deterministic convolution, exponential time differencing per mode;
* Z: Young convolution of Y(u) = G1 grad u + G0 u + g against eta;
* H: Ito convolution of h(u) against W, left point with variance-exact
  per-mode weights.

Coefficients are described by small dataclasses with a ``kind`` and
parameters. On the torus they are evaluated pseudo-spectrally; on a plain
diagonal semigroup (single mode, identity) they act on the coefficients
directly, which is the scalar ODE setting of the closed-form oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (ConfigError, NonFiniteError, PreconditionError,
                     WindowDivergenceError)
from .paths import Grid
from .sewing import SCHEMES, accumulate, one_step_integrals
from .spectral import (DiagonalSemigroup, HeatSemigroup, ou_weight, phi1, phi2,
                       single_mode)

NONLINEARITY_KINDS = ("zero", "const", "linear", "sin", "grad_sin")
XI_KINDS = ("zero", "const", "sine", "rough", "random")


@dataclass
class Nonlinearity:
    """Pointwise map of (u, grad u): zero, const c, linear a u + c, c sin u, c sin(d_1 u)."""

    kind: str = "zero"
    c: float = 0.0
    a: float = 0.0

    def __post_init__(self):
        if self.kind not in NONLINEARITY_KINDS:
            raise ConfigError(f"unknown nonlinearity {self.kind!r}; choose from {NONLINEARITY_KINDS}")

    @property
    def is_zero(self):
        return self.kind == "zero" or (self.kind in ("const", "sin", "grad_sin") and self.c == 0) or (
            self.kind == "linear" and self.a == 0 and self.c == 0)

    @property
    def needs_gradient(self):
        return self.kind == "grad_sin"

    @property
    def lipschitz(self):
        return {"zero": 0.0, "const": 0.0, "linear": abs(self.a)}.get(self.kind, abs(self.c))

    @property
    def affine(self):
        return self.kind in ("zero", "const", "linear")

    def pointwise(self, u, du=None):
        if self.kind == "zero":
            return np.zeros_like(u)
        if self.kind == "const":
            return np.full_like(u, self.c)
        if self.kind == "linear":
            return self.a * u + self.c
        if self.kind == "sin":
            return self.c * np.sin(u)
        if du is None:
            raise PreconditionError("grad_sin needs a spatial gradient (torus semigroup)")
        return self.c * np.sin(du)


@dataclass
class Drift:
    """Y_e(u) = g1[e] (1 + a1 cos x_1) b.grad u + g0[e] (1 + a0 cos x_1) u + g[e].

    ``g`` enters as a spatially constant field. On a plain diagonal semigroup
    only the g0 and g parts are available and a0 must vanish.
    """

    g0: Sequence[float] = (1.0,)
    a0: float = 0.0
    g1: Sequence[float] = (0.0,)
    a1: float = 0.0
    b: Optional[Sequence[float]] = None
    g: Sequence[float] = (0.0,)

    @property
    def e(self):
        return len(self.g0)

    def check(self, e):
        for name in ("g0", "g1", "g"):
            if len(getattr(self, name)) != e:
                raise ConfigError(f"drift coefficient {name} needs {e} entries, got {len(getattr(self, name))}")

    @property
    def has_gradient(self):
        return any(v != 0 for v in self.g1)

    @property
    def is_zero(self):
        return not (any(self.g0) or any(self.g1) or any(self.g))


@dataclass
class InitialDatum:
    """xi: zero, const c, sine c sin(k x_1), rough (slow spectral tail), random (per member)."""

    kind: str = "sine"
    c: float = 1.0
    k: int = 1
    decay: float = 1.0

    def __post_init__(self):
        if self.kind not in XI_KINDS:
            raise ConfigError(f"unknown initial datum {self.kind!r}; choose from {XI_KINDS}")


@dataclass
class ProblemSpec:
    """Exponents, dimensions and coefficients of one mild equation.

    ``space`` is "torus" (heat semigroup on T^n with cutoff K) or "mode"
    (one Fourier mode with generator value ``kappa``).
    """

    T: float = 1.0
    n: int = 1
    l: int = 1
    e: int = 1
    d: int = 1
    K: int = 16
    alpha: float = 0.75
    beta: float = 0.3
    gamma: float = 0.0
    lam: float = 0.5
    mu: float = 0.0
    nu: float = 0.5
    m: float = 2.0
    mass: float = 0.0
    space: str = "torus"
    kappa: float = 1.0
    continuous: bool = False
    xi: InitialDatum = field(default_factory=InitialDatum)
    f: Nonlinearity = field(default_factory=Nonlinearity)
    drift: Drift = field(default_factory=Drift)
    h: Nonlinearity = field(default_factory=Nonlinearity)

    def validate(self):
        a, b = self.alpha, self.beta
        if not 0.5 < a <= 1.0:
            raise ConfigError(f"α must lie in (1/2, 1], got α = {a}")
        if not 1.0 - a < b < 0.5:
            raise ConfigError(f"β must lie in (1−α, 1/2), got β = {b} with α = {a}")
        if not 0.0 <= self.lam < 1.0:
            raise ConfigError(f"λ must lie in [0, 1), got λ = {self.lam}")
        if not 0.0 <= self.mu < 0.5:
            raise ConfigError(f"μ must lie in [0, 1/2), got μ = {self.mu}")
        if not 0.0 <= self.nu < a:
            raise ConfigError(f"ν must lie in [0, α), got ν = {self.nu} with α = {a}")
        if not 2.0 <= self.m < math.inf:
            raise ConfigError(f"m must lie in [2, ∞), got m = {self.m}")
        if self.continuous:
            cap = min(1.0 - self.lam, 0.5 - max(b, self.nu))
            if not 1.0 / self.m < cap:
                raise ConfigError(
                    f"continuous mild solutions need 1/m < (1−λ)∧[1/2−(β∨ν)]: 1/m = {1 / self.m:g}, "
                    f"(1−λ)∧[1/2−(β∨ν)] = {cap:g}"
                )
        if self.T <= 0:
            raise ConfigError(f"T must be positive, got {self.T}")
        if min(self.n, self.l, self.e, self.d) < 1 or self.K < 0:
            raise ConfigError("dimensions n, l, e, d must be >= 1 and K >= 0")
        if self.mass < 0:
            raise ConfigError(f"mass shift m0 must be >= 0, got {self.mass}")
        if self.space not in ("torus", "mode"):
            raise ConfigError(f"space must be 'torus' or 'mode', got {self.space!r}")
        self.drift.check(self.e)
        if self.f.needs_gradient and self.lam < 0.5:
            raise ConfigError(f"a gradient nonlinearity needs λ ≥ 1/2, got λ = {self.lam}")
        if self.drift.has_gradient and self.nu < 0.5:
            raise ConfigError(f"a first-order drift G¹∇u needs ν ≥ 1/2, got ν = {self.nu}")
        if self.space == "mode":
            if self.f.needs_gradient or self.drift.has_gradient or self.drift.a0 != 0:
                raise ConfigError("gradient terms and variable G⁰ need the torus space")
            if self.xi.kind in ("sine", "rough"):
                raise ConfigError(f"initial datum {self.xi.kind!r} needs the torus space")
        return self

    @property
    def regularity_cap(self):
        """(1−λ)∧(1/2−μ)∧(α−ν): upper bound for the spatial regularity gain θ."""
        return min(1.0 - self.lam, 0.5 - self.mu, self.alpha - self.nu)

    def semigroup(self) -> DiagonalSemigroup:
        if self.space == "mode":
            return single_mode(self.kappa)
        return HeatSemigroup(self.n, self.K, self.mass)


def torus_problem(**overrides) -> ProblemSpec:
    """The concrete torus family: gradient nonlinearity, first-order Young drift, Ito noise."""
    base = dict(
        alpha=0.75, beta=0.3, gamma=0.0, lam=0.5, mu=0.0, nu=0.5, m=2.0,
        xi=InitialDatum("sine", 1.0, 1),
        f=Nonlinearity("grad_sin", c=0.5),
        drift=Drift(g0=(1.0,), a0=0.5, g1=(0.25,), a1=0.5, g=(0.1,)),
        h=Nonlinearity("sin", c=0.5),
    )
    base.update(overrides)
    return ProblemSpec(**base).validate()


def linear_mode_problem(kappa=1.0, alpha=0.75, beta=0.3, xi=1.0, f=None, g0=1.0, h=None) -> ProblemSpec:
    """Scalar single-mode problem du = -kappa u dt + f(u) dt + g0 u d eta + h(u) dW."""
    return ProblemSpec(
        space="mode", kappa=kappa, alpha=alpha, beta=beta, lam=0.0, nu=0.0,
        xi=InitialDatum("const", xi), f=f or Nonlinearity(),
        drift=Drift(g0=(g0,), g1=(0.0,), g=(0.0,)), h=h or Nonlinearity(),
    ).validate()


# ---------------------------------------------------------------------------
# coefficient evaluation


class Coefficients:
    """Evaluates f, Y and h on field arrays (..., l, *modes) for one problem."""

    def __init__(self, problem: ProblemSpec, semigroup: DiagonalSemigroup):
        self.p = problem
        self.sg = semigroup
        self.torus = isinstance(semigroup, HeatSemigroup)
        if self.torus:
            x1 = semigroup.points()[0]
            self.cos1 = np.cos(x1)
            self._b = np.ones(problem.n) if problem.drift.b is None else np.asarray(problem.drift.b, float)

    def _phys(self, u):
        return self.sg.synthesize(u)

    def _spec(self, v):
        return self.sg.analyze(v)

    def _first_derivative(self, u, weights=None):
        grad = self.sg.gradient(u)  # (..., n, l, modes)
        lead = u.ndim - self.sg.field_ndim
        if weights is None:
            return self._phys(np.take(grad, 0, axis=lead))
        w = weights.reshape((self.p.n,) + (1,) * self.sg.field_ndim)
        return self._phys(np.sum(grad * w, axis=lead))

    def f(self, u):
        nl = self.p.f
        if nl.kind == "zero":
            return np.zeros_like(u)
        if not self.torus:
            return nl.pointwise(u)
        du = self._first_derivative(u) if nl.needs_gradient else None
        return self._spec(nl.pointwise(self._phys(u), du))

    def h(self, u):
        """h(u) broadcast over the d noise components: (..., l, *modes)."""
        nl = self.p.h
        if nl.kind == "zero":
            return np.zeros_like(u)
        if not self.torus:
            return nl.pointwise(u)
        return self._spec(nl.pointwise(self._phys(u)))

    def Y(self, u):
        """Young integrand with the e axis inserted before the component axis."""
        dr = self.p.drift
        fd = self.sg.field_ndim
        lead = u.ndim - fd
        shape_e = (len(dr.g0),) + (1,) * fd
        g0 = np.asarray(dr.g0, float).reshape(shape_e)
        g1 = np.asarray(dr.g1, float).reshape(shape_e)
        gc = np.asarray(dr.g, float).reshape(shape_e)
        ue = np.expand_dims(u, lead)
        if not self.torus:
            return g0 * ue + gc * self.sg.constant(1.0, self.p.l)
        out = g0 * ue
        if dr.a0 != 0:
            out = out + dr.a0 * g0 * np.expand_dims(self._spec(self.cos1 * self._phys(u)), lead)
        if dr.has_gradient:
            bgrad = self._first_derivative(u, self._b)
            out = out + g1 * np.expand_dims(self._spec((1.0 + dr.a1 * self.cos1) * bgrad), lead)
        if any(dr.g):
            out = out + gc * self.sg.constant(1.0, self.p.l)
        return out

    def initial(self, M=1, seed=0):
        """(M, l, *modes) initial data; ``random`` draws one stream per member."""
        from .drivers import RngStream

        xi = self.p.xi
        sg = self.sg
        l = self.p.l
        if xi.kind == "zero":
            one = sg.zeros(l)
        elif xi.kind == "const":
            one = sg.constant(xi.c, l)
        elif xi.kind == "sine":
            x1 = sg.points()[0]
            one = sg.analyze(np.broadcast_to(xi.c * np.sin(xi.k * x1), (l,) + x1.shape))
        elif xi.kind == "rough":
            expo = 2.0 * self.p.gamma + self.p.n / 2.0 + 0.05
            kk = np.sqrt(np.maximum(sg.ksq, 1.0))
            one = np.broadcast_to(xi.c * kk ** (-expo), (l,) + sg.mode_shape).astype(complex)
        else:
            out = np.empty((M, l) + sg.mode_shape, dtype=complex)
            for i in range(M):
                gen = RngStream(seed, 10 ** 6 + i).generator()
                if self.torus:
                    out[i] = xi.c * sg.random_field(gen, l, xi.decay)
                else:
                    out[i] = xi.c * gen.standard_normal((l,) + sg.mode_shape)
            return out
        return np.broadcast_to(one, (M,) + one.shape).copy()


# ---------------------------------------------------------------------------
# convolutions (time axis first internally)


def _time_first(u, sg):
    u = np.asarray(u)
    if u.ndim == sg.field_ndim + 1:
        return u, False
    if u.ndim == sg.field_ndim + 2:
        return np.moveaxis(u, 1, 0), True
    raise PreconditionError(f"field path has unexpected shape {u.shape}")


def _etd_increments(fu, sg, dt, scheme):
    x = sg.q * dt
    if scheme == "left":
        return dt * phi1(x) * fu[:-1]
    p1, p2 = phi1(x), phi2(x)
    return dt * ((p1 - p2) * fu[:-1] + p2 * fu[1:])


def _check_finite(arr, what):
    bad = ~np.isfinite(arr)
    if np.any(bad):
        k = int(np.argwhere(bad.reshape(bad.shape[0], -1).any(axis=1))[0, 0])
        raise NonFiniteError(f"{what} produced a non-finite value at time index {k}")


def deterministic_convolution(fvals, semigroup, grid: Grid, scheme="left"):
    """F_t = int_0^t S_{t-r} f_r dr from samples f on the grid nodes.

    ``left`` uses dt phi1(q dt) f_k per step (exact for constant f);
    ``trapezoid`` adds the linear-interpolation correction with phi2 and is
    second order for smooth f.
    """
    ft, ens = _time_first(fvals, semigroup)
    if scheme not in SCHEMES:
        raise PreconditionError(f"unknown scheme {scheme!r}")
    _check_finite(ft, "nonlinearity")
    F = accumulate(semigroup.multiplier(grid.dt), _etd_increments(ft, semigroup, grid.dt, scheme))
    return np.moveaxis(F, 0, 1) if ens else F


def _noise_increments(hu, dW, sg, dt, nbatch):
    """sum_d w(q dt) h(u_k) dW_{k,d}; hu (N+1, *batch, l, modes), dW (N, *batch, d)."""
    w = ou_weight(sg.q * dt)
    s = np.sum(dW, axis=-1).reshape(dW.shape[:-1] + (1,) * sg.field_ndim)
    return w * hu[:-1] * s


def stochastic_convolution(hvals, W, semigroup, grid: Grid):
    """H_t = int_0^t S_{t-r} h_r dW_r by the left-point sum with weights w(q dt).

    ``hvals`` (N+1, l, *modes) or (M, N+1, ...); ``W`` (N+1, d) or (M, N+1, d).
    h is shared by the d components of W.
    """
    ht, ens = _time_first(hvals, semigroup)
    Wv = np.asarray(getattr(W, "values", W), dtype=float)
    Wt = np.moveaxis(Wv, 1, 0) if Wv.ndim == 3 else Wv
    if Wt.shape[0] != ht.shape[0]:
        raise PreconditionError(f"W has {Wt.shape[0]} nodes, integrand has {ht.shape[0]}")
    if Wt.ndim - 1 != ht.ndim - semigroup.field_ndim:
        raise PreconditionError("W and the integrand disagree on the ensemble axis")
    _check_finite(ht, "noise coefficient")
    inc = _noise_increments(ht, np.diff(Wt, axis=0), semigroup, grid.dt, ht.ndim - semigroup.field_ndim - 1)
    H = accumulate(semigroup.multiplier(grid.dt), inc)
    return np.moveaxis(H, 0, 1) if ens else H


# ---------------------------------------------------------------------------
# Picard iteration


@dataclass
class Trajectory:
    """Solution samples u with shape (M, N+1, l, *modes) plus Picard diagnostics."""

    u: np.ndarray
    grid: Grid
    picard_residuals: list
    window_bounds: list
    rho_hat: list
    window_len: float
    halvings: int = 0
    scheme: str = "trapezoid"

    @property
    def converged_rho(self):
        return max(self.rho_hat) if self.rho_hat else 0.0

    def member(self, i=0):
        return self.u[i]


class _Window:
    """The data of one window: driver increments and noise increments."""

    def __init__(self, eta, dW, a, b):
        self.eta = eta[a:b + 1]
        self.dW = None if dW is None else dW[a:b]


class PicardSolver:
    """Iterates Phi on chained windows. Shared by solve_mild and picard_map."""

    def __init__(self, problem: ProblemSpec, grid: Grid, scheme="trapezoid", semigroup=None):
        self.p = problem
        self.grid = grid
        self.sg = semigroup or problem.semigroup()
        self.coef = Coefficients(problem, self.sg)
        if scheme not in SCHEMES:
            raise PreconditionError(f"unknown scheme {scheme!r}")
        self.scheme = scheme
        dt = grid.dt
        self.decay = self.sg.multiplier(dt)

    def phi(self, u0, U, eta, dW):
        """Phi restricted to a window: U has shape (n+1, B, l, *modes), u0 = U[0]."""
        sg, dt = self.sg, self.grid.dt
        n = U.shape[0] - 1
        steps = np.arange(n + 1) * dt
        out = sg.apply(steps, np.broadcast_to(u0, U.shape))
        c = self.coef
        if not self.p.f.is_zero:
            fu = c.f(U)
            _check_finite(fu, "nonlinearity")
            out = out + accumulate(self.decay, _etd_increments(fu, sg, dt, self.scheme))
        if not self.p.drift.is_zero:
            Y = c.Y(U)
            _check_finite(Y, "Young integrand")
            out = out + accumulate(self.decay, one_step_integrals(Y, eta, sg, dt, self.scheme, nbatch=1))
        if dW is not None and not self.p.h.is_zero:
            hu = c.h(U)
            _check_finite(hu, "noise coefficient")
            out = out + accumulate(self.decay, _noise_increments(hu, dW, sg, dt, 1))
        return out

    def _residual(self, a, b):
        return float(np.max(self.sg.norm(a - b, self.p.gamma)))

    def run_window(self, u0, eta, dW, n, tol, max_iter, rho_max, guess="constant"):
        """Return (U, residuals, rho, ok)."""
        U = np.broadcast_to(u0, (n + 1,) + u0.shape).copy()
        if guess == "zero":
            U[1:] = 0.0
        scale = max(1.0, float(np.max(self.sg.norm(u0, self.p.gamma))))
        res = []
        for _ in range(max_iter):
            V = self.phi(u0, U, eta, dW)
            r = self._residual(V, U)
            res.append(r)
            U = V
            if not math.isfinite(r):
                return U, res, math.inf, False
            if r < tol * scale:
                break
            if len(res) >= 3 and res[-1] > rho_max * res[-2]:
                return U, res, res[-1] / res[-2], False
        else:
            return U, res, math.inf, False
        ratios = [res[i + 1] / res[i] for i in range(1, len(res) - 1) if res[i] > 0]
        rho = max(ratios) if ratios else 0.0
        return U, res, rho, True


def _prepare(problem, eta, W, grid, xi, M, seed, sg, coef):
    eta_v = np.asarray(getattr(eta, "values", eta), dtype=float)
    if eta_v.ndim == 1:
        eta_v = eta_v[:, None]
    if eta_v.shape != (grid.N + 1, problem.e):
        raise PreconditionError(f"eta must have shape ({grid.N + 1}, {problem.e}), got {eta_v.shape}")
    dW = None
    if W is not None:
        Wv = np.asarray(getattr(W, "values", W), dtype=float)
        if Wv.ndim == 2:
            Wv = Wv[None]
        if Wv.shape[1:] != (grid.N + 1, problem.d):
            raise PreconditionError(f"W must have shape (M, {grid.N + 1}, {problem.d}), got {Wv.shape}")
        M = Wv.shape[0]
        dW = np.moveaxis(np.diff(Wv, axis=1), 1, 0)  # (N, M, d)
    if xi is None:
        xi0 = coef.initial(M, seed)
    else:
        xi0 = np.asarray(xi, dtype=complex)
        if xi0.ndim == sg.field_ndim:
            xi0 = np.broadcast_to(xi0, (M,) + xi0.shape).copy()
    if xi0.shape[0] != M:
        if xi0.shape[0] == 1:
            xi0 = np.repeat(xi0, M, axis=0)
        else:
            raise PreconditionError(f"xi has {xi0.shape[0]} members, W has {M}")
    return eta_v, dW, xi0


def solve_mild(problem: ProblemSpec, eta, W=None, grid: Grid = None, window_len=None,
               picard_tol=1e-10, max_iter=60, xi=None, M=1, seed=0, scheme="trapezoid",
               max_halvings=4, rho_max=0.9, auto_halve=True, guess="constant") -> Trajectory:
    """Solve the mild equation on ``grid`` for every member of the ensemble.

    ``eta`` (N+1, e) is shared; ``W`` (M, N+1, d) and ``xi`` (M, l, *modes)
    vary per member. Windows start at ``window_len`` (default T/8) and are
    halved, at most ``max_halvings`` times, whenever the Picard residuals
    stop contracting by at least ``rho_max`` or ``max_iter`` is reached.
    """
    problem.validate()
    grid = grid or Grid(problem.T, 10)
    solver = PicardSolver(problem, grid, scheme)
    sg = solver.sg
    eta_v, dW, xi0 = _prepare(problem, eta, W, grid, xi, M, seed, sg, solver.coef)
    L = problem.T / 8 if window_len is None else float(window_len)
    if not 0 < L <= problem.T * (1 + 1e-12):
        raise PreconditionError(f"window_len must lie in (0, T], got {L}")
    n_nodes = L / grid.dt
    if abs(n_nodes - round(n_nodes)) > 1e-9 or round(n_nodes) < 1:
        raise PreconditionError(f"window_len {L} is not a whole number of grid steps dt = {grid.dt}")
    n = int(round(n_nodes))

    B = xi0.shape[0]
    u = np.empty((grid.N + 1, B) + xi0.shape[1:], dtype=complex)
    u[0] = xi0
    residuals, bounds, rhos = [], [], []
    halvings = 0
    a = 0
    while a < grid.N:
        b = min(a + n, grid.N)
        wdW = None if dW is None else dW[a:b]
        U, res, rho, ok = solver.run_window(u[a], eta_v[a:b + 1], wdW, b - a, picard_tol, max_iter,
                                            rho_max, guess)
        if not ok:
            if auto_halve and halvings < max_halvings and n > 1:
                n //= 2
                halvings += 1
                continue
            raise WindowDivergenceError(
                f"Picard iteration did not contract on window [{grid.times[a]:.6g}, {grid.times[b]:.6g}] "
                f"(last ratio {rho:.3g}); try a smaller window_len",
                report={"window": (a, b), "residuals": res, "halvings": halvings},
            )
        u[a:b + 1] = U
        residuals.append(res)
        bounds.append((a, b))
        rhos.append(rho)
        a = b
    return Trajectory(np.moveaxis(u, 1, 0), grid, residuals, bounds, rhos, n * grid.dt, halvings, scheme)


def picard_map(problem: ProblemSpec, u, eta, W=None, grid: Grid = None, scheme="trapezoid"):
    """One application of Phi on the whole grid: S xi + F(u) + Z(u) + H(u) with xi = u_0.

    ``u`` has shape (N+1, l, *modes) or (M, N+1, l, *modes).
    """
    problem.validate()
    solver = PicardSolver(problem, grid, scheme)
    ut, ens = _time_first(u, solver.sg)
    if not ens:
        ut = ut[:, None]
    eta_v = np.asarray(getattr(eta, "values", eta), dtype=float)
    eta_v = eta_v[:, None] if eta_v.ndim == 1 else eta_v
    dW = None
    if W is not None:
        Wv = np.asarray(getattr(W, "values", W), dtype=float)
        Wv = Wv[None] if Wv.ndim == 2 else Wv
        dW = np.moveaxis(np.diff(Wv, axis=1), 1, 0)
    out = solver.phi(ut[0], ut, eta_v, dW)
    return np.moveaxis(out, 0, 1) if ens else out[:, 0]


# ---------------------------------------------------------------------------
# closed-form oracles


def oracle_single_mode(kind, params):
    """Closed-form scalar trajectories.

    young_linear: xi exp(-kappa t + eta_t - eta_0), needs ``times`` and ``eta``;
    deterministic_linear: xi exp(-(kappa + c) t);
    ou: (mean, variance) of du = -kappa u dt + sigma dW, u_0 = xi.
    """
    t = np.asarray(params.get("times"), dtype=float)
    xi = float(params.get("xi", 1.0))
    kappa = float(params.get("kappa", 1.0))
    if kind == "young_linear":
        eta = np.asarray(params.get("eta", np.zeros_like(t)), dtype=float)
        eta = eta.reshape(len(t), -1)[:, 0]
        return xi * np.exp(-kappa * t + eta - eta[0])
    if kind == "deterministic_linear":
        return xi * np.exp(-(kappa + float(params.get("c", 0.0))) * t)
    if kind == "ou":
        sigma = float(params.get("sigma", 1.0))
        mean = xi * np.exp(-kappa * t)
        var = sigma ** 2 * t if kappa == 0 else sigma ** 2 * (1 - np.exp(-2 * kappa * t)) / (2 * kappa)
        return mean, var
    raise PreconditionError(f"unknown oracle {kind!r}")
