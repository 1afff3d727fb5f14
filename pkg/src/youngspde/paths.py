"""Uniform dyadic grids, increment operators and Hoelder / L^m norm estimators.

Paths are arrays with the time axis first, ``(N+1, *field)``; ensembles
carry a leading member axis, ``(M, N+1, *field)``. A *norm* is any
callable reducing the trailing field axes to a nonnegative array, e.g.
``semigroup.norm_fn(gamma)`` or :func:`euclidean`.

All suprema over pairs are taken over grid nodes, so they are lower
bounds for the continuous-time quantities.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DegenerateGridError, GridMismatchError, PreconditionError

#: pairs with lag above this many steps are skipped only when a window is requested
EXHAUSTIVE_MAX_N = 2 ** 12


@dataclass(frozen=True)
class Grid:
    """t_k = k T / N on [0, T] with N = base * 2**level."""

    T: float = 1.0
    level: int = 0
    base: int = 1

    def __post_init__(self):
        if self.T <= 0:
            raise DegenerateGridError("horizon T must be positive")
        if self.level < 0 or self.base < 1:
            raise DegenerateGridError("need level >= 0 and base >= 1")

    @classmethod
    def from_n(cls, T, N):
        if N < 1:
            raise DegenerateGridError("a grid needs at least one interval")
        level = 0
        while N % 2 == 0:
            N //= 2
            level += 1
        return cls(float(T), level, N)

    @property
    def N(self) -> int:
        return self.base << self.level

    @property
    def dt(self) -> float:
        return self.T / self.N

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.N + 1)

    def refine(self, levels=1) -> "Grid":
        return Grid(self.T, self.level + levels, self.base)

    def coarsen(self, levels=1) -> "Grid":
        if levels > self.level:
            raise DegenerateGridError("cannot coarsen below level 0")
        return Grid(self.T, self.level - levels, self.base)

    def stride_to(self, coarse: "Grid") -> int:
        """Index stride such that coarse node j is node j*stride of this grid."""
        if coarse.T != self.T or coarse.base != self.base or coarse.level > self.level:
            raise GridMismatchError(f"{coarse} is not a dyadic coarsening of {self}")
        return 1 << (self.level - coarse.level)

    def index_of(self, t) -> int:
        k = round(t / self.dt)
        if abs(k * self.dt - t) > 1e-9 * self.T or not 0 <= k <= self.N:
            raise GridMismatchError(f"time {t} is not a node of {self}")
        return int(k)


@dataclass
class DriverPath:
    """A sampled driver eta (or W) on a grid; values have shape (N+1, e)."""

    grid: Grid
    values: np.ndarray
    alpha_nominal: float
    kind: str = "deterministic"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim == 1:
            self.values = self.values[:, None]
        if self.values.shape[0] != self.grid.N + 1:
            raise GridMismatchError(
                f"driver has {self.values.shape[0]} samples, grid has {self.grid.N + 1} nodes"
            )

    @property
    def dims(self) -> int:
        return self.values.shape[1]

    def increments(self) -> np.ndarray:
        return np.diff(self.values, axis=0)

    def holder(self, alpha=None) -> float:
        a = self.alpha_nominal if alpha is None else alpha
        return holder_seminorm(self.values, self.grid, a)


def euclidean(ndim=1) -> Callable:
    """Euclidean norm over the last ``ndim`` axes (0 means absolute value)."""
    if ndim == 0:
        return np.abs
    return lambda x: np.sqrt(np.sum(np.abs(x) ** 2, axis=tuple(range(-ndim, 0))))


def _check_grid(values, grid, time_axis=0):
    n = np.shape(values)[time_axis]
    if n < 2:
        raise DegenerateGridError("need at least 2 grid points")
    if n != grid.N + 1:
        raise GridMismatchError(f"path has {n} nodes, grid has {grid.N + 1}")


def increment(Y, s_idx, t_idx):
    """delta Y_{s,t} = Y_t - Y_s at node indices."""
    Y = np.asarray(Y)
    if not 0 <= s_idx <= t_idx < Y.shape[0]:
        raise IndexError(f"need 0 <= s <= t < {Y.shape[0]}, got ({s_idx}, {t_idx})")
    return Y[t_idx] - Y[s_idx]


def mild_increment(Y, semigroup, grid, s_idx, t_idx):
    """hat-delta Y_{s,t} = Y_t - S_{t-s} Y_s."""
    Y = semigroup.check_field(Y)
    if not 0 <= s_idx <= t_idx < Y.shape[0]:
        raise IndexError(f"need 0 <= s <= t < {Y.shape[0]}, got ({s_idx}, {t_idx})")
    return Y[t_idx] - semigroup.apply((t_idx - s_idx) * grid.dt, Y[s_idx])


class TwoParamArray:
    """A two-parameter process A_{s,t} on grid index pairs, given by a callback."""

    def __init__(self, grid: Grid, fn: Callable[[int, int], np.ndarray]):
        self.grid = grid
        self._fn = fn

    def __call__(self, i, j):
        if not 0 <= i <= j <= self.grid.N:
            raise IndexError(f"pair ({i}, {j}) outside Delta_2 of {self.grid}")
        return self._fn(i, j)

    @classmethod
    def mild_increments(cls, Y, semigroup, grid):
        return cls(grid, lambda i, j: mild_increment(Y, semigroup, grid, i, j))

    @classmethod
    def increments(cls, Y, grid):
        return cls(grid, lambda i, j: increment(Y, i, j))


def delta3(A: TwoParamArray, s_idx, r_idx, t_idx):
    """delta A_{s,r,t} = A_{s,t} - A_{s,r} - A_{r,t}."""
    if not s_idx <= r_idx <= t_idx:
        raise PreconditionError(f"need s <= r <= t, got ({s_idx}, {r_idx}, {t_idx})")
    return A(s_idx, t_idx) - A(s_idx, r_idx) - A(r_idx, t_idx)


def delta3_defect(A: TwoParamArray, semigroup, s_idx, r_idx, t_idx):
    """hat-delta A_{s,r,t} = A_{s,t} - S_{t-r} A_{s,r} - A_{r,t}."""
    if not s_idx <= r_idx <= t_idx:
        raise PreconditionError(f"need s <= r <= t, got ({s_idx}, {r_idx}, {t_idx})")
    dt = A.grid.dt
    return A(s_idx, t_idx) - semigroup.apply((t_idx - r_idx) * dt, A(s_idx, r_idx)) - A(r_idx, t_idx)


# ---------------------------------------------------------------------------
# pair suprema


def _lags(N, window):
    if window is None:
        return range(1, N + 1)
    return range(1, min(N, int(window)) + 1)


def lag_norms(values, grid, norm=None, semigroup=None, window=None):
    """Yield (lag d, norms of the (mild) increments over all pairs at lag d).

    ``values`` has shape (M, N+1, *field); yielded norms have shape (M, N+1-d).
    """
    norm = norm or euclidean(values.ndim - 2)
    for d in _lags(grid.N, window):
        if semigroup is None:
            diff = values[:, d:] - values[:, :-d]
        else:
            diff = values[:, d:] - semigroup.apply(d * grid.dt, values[:, :-d])
        yield d, norm(diff)


def holder_seminorm(values, grid, beta, norm=None, semigroup=None, window=None):
    """max over grid pairs i<j of |delta Y_{t_i,t_j}| / (t_j - t_i)^beta.

    With ``semigroup`` the mild increment Y_t - S_{t-s} Y_s is used instead.
    """
    values = np.asarray(values)
    _check_grid(values, grid)
    if not 0 < beta <= 1:
        raise PreconditionError("Hoelder exponent must lie in (0, 1]")
    best = 0.0
    for d, nrm in lag_norms(values[None], grid, norm, semigroup, window):
        best = max(best, float(nrm.max()) / (d * grid.dt) ** beta)
    return best


def sup_norm(values, norm=None):
    """sup_t |Y_t| for a single path."""
    values = np.asarray(values)
    norm = norm or euclidean(values.ndim - 1)
    return float(np.max(norm(values)))


def lm_mean(x, m, axis=0):
    """Empirical (E|x|^m)^{1/m}; m = inf is the sample maximum."""
    x = np.abs(np.asarray(x, dtype=float))
    if math.isinf(m):
        return np.max(x, axis=axis)
    # scale first so high powers do not overflow
    scale = np.max(x, axis=axis, keepdims=True)
    scale = np.where(scale > 0, scale, 1.0)
    return np.squeeze(scale, axis=axis) * np.mean((x / scale) ** m, axis=axis) ** (1.0 / m)


def _check_ensemble(ensemble, grid):
    ensemble = np.asarray(ensemble)
    if ensemble.ndim < 2 or ensemble.shape[0] == 0:
        raise PreconditionError("ensemble must be a nonempty array (M, N+1, ...)")
    _check_grid(ensemble, grid, time_axis=1)
    return ensemble


@dataclass
class MixedNorms:
    """Both orders of the mixed Hoelder / L^m norm of one ensemble."""

    lm_of_holder: float  # sup_pairs (E|dY|^m)^{1/m} / |t-s|^beta   (E^beta L_m order)
    holder_of_lm: float  # (E (sup_pairs |dY| / |t-s|^beta)^m)^{1/m} (L_m E^beta order)
    window: Optional[int] = None


def mixed_norms(ensemble, grid, beta, m=2.0, norm=None, semigroup=None, window=None):
    """Compute both mixed norms of the (mild) increments in one pass over lags."""
    ensemble = _check_ensemble(ensemble, grid)
    if not 0 < beta <= 1:
        raise PreconditionError("Hoelder exponent must lie in (0, 1]")
    if m < 1:
        raise PreconditionError("m must be >= 1")
    M = ensemble.shape[0]
    per_member = np.zeros(M)
    lm_best = 0.0
    for d, nrm in lag_norms(ensemble, grid, norm, semigroup, window):
        scale = (d * grid.dt) ** beta
        lm_best = max(lm_best, float(np.max(lm_mean(nrm, m, axis=0))) / scale)
        per_member = np.maximum(per_member, nrm.max(axis=1) / scale)
    return MixedNorms(lm_best, float(lm_mean(per_member, m)), window)


def mixed_norm_Lm_of_holder(ensemble, grid, beta, m=2.0, norm=None, semigroup=None, window=None):
    """sup over pairs of the empirical L^m norm of |dY_{s,t}|, divided by |t-s|^beta."""
    return mixed_norms(ensemble, grid, beta, m, norm, semigroup, window).lm_of_holder


def mixed_norm_holder_of_Lm(ensemble, grid, beta, m=2.0, norm=None, semigroup=None, window=None):
    """Empirical L^m norm over members of the pathwise Hoelder seminorm."""
    return mixed_norms(ensemble, grid, beta, m, norm, semigroup, window).holder_of_lm


def sup_lm(ensemble, m=2.0, norm=None):
    """||Y||_{0,m} = sup_t (E|Y_t|^m)^{1/m}."""
    ensemble = np.asarray(ensemble)
    norm = norm or euclidean(ensemble.ndim - 2)
    return float(np.max(lm_mean(norm(ensemble), m, axis=0)))


def lm_sup(ensemble, m=2.0, norm=None):
    """||Y||_{m,0} = (E sup_t |Y_t|^m)^{1/m}."""
    ensemble = np.asarray(ensemble)
    norm = norm or euclidean(ensemble.ndim - 2)
    return float(lm_mean(norm(ensemble).max(axis=1), m))


@dataclass
class SolutionNorms:
    """||Y||_{E^beta L_m H_gamma} and ||Y||_{L_m E^beta H_gamma} estimates."""

    e_beta_lm: float
    lm_e_beta: float
    holder_part: MixedNorms
    sup_part: tuple


def solution_norms(ensemble, grid, semigroup, beta, gamma, m=2.0, mild=False, window=None):
    """Both solution-space norms: Hoelder part in H_{gamma-beta}, sup part in H_gamma.

    With ``mild=True`` the Hoelder part uses mild increments (the
    equivalent norm of the norm-equivalence result).
    """
    ensemble = _check_ensemble(ensemble, grid)
    mixed = mixed_norms(
        ensemble, grid, beta, m, semigroup.norm_fn(gamma - beta),
        semigroup if mild else None, window,
    )
    s1 = sup_lm(ensemble, m, semigroup.norm_fn(gamma))
    s2 = lm_sup(ensemble, m, semigroup.norm_fn(gamma))
    return SolutionNorms(mixed.lm_of_holder + s1, mixed.holder_of_lm + s2, mixed, (s1, s2))


def norm_equivalence_ratio(ensemble, grid, semigroup, beta, gamma, m=2.0, window=None):
    """(mild-increment E^beta norm) / (plain E^beta norm); bounded above and below."""
    plain = solution_norms(ensemble, grid, semigroup, beta, gamma, m, False, window).e_beta_lm
    mild = solution_norms(ensemble, grid, semigroup, beta, gamma, m, True, window).e_beta_lm
    if plain == 0:
        return 1.0 if mild == 0 else math.inf
    return mild / plain


def default_window(N):
    """Lag window for the stress regime, None (exhaustive) for N <= 2^12."""
    return None if N <= EXHAUSTIVE_MAX_N else EXHAUSTIVE_MAX_N // 4


# ---------------------------------------------------------------------------
# CSV


def _fmt(x):
    return format(float(x), ".17g")


def path_to_csv(grid: Grid, values) -> str:
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    _check_grid(values, grid)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [f"v_{i + 1}" for i in range(values.shape[1])])
    for t, row in zip(grid.times, values):
        w.writerow([_fmt(t)] + [_fmt(v) for v in row])
    return buf.getvalue()


def path_from_csv(text):
    """Parse path CSV into (Grid, values (N+1, e))."""
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    if not rows or rows[0][0] != "t":
        raise GridMismatchError("path CSV must start with a 't,v_1,...' header")
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    if data.shape[0] < 2:
        raise DegenerateGridError("need at least 2 grid points")
    t = data[:, 0]
    grid = Grid.from_n(t[-1], data.shape[0] - 1)
    if t[0] != 0 or np.max(np.abs(t - grid.times)) > 1e-9 * grid.T:
        raise GridMismatchError("path CSV times are not a uniform grid starting at 0")
    return grid, data[:, 1:]
