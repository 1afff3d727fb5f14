"""Driving paths: fractional Brownian motion, Brownian motion, test drivers.

Random streams use numpy's PCG64 seeded through ``SeedSequence(seed,
spawn_key=(stream_index,))``; the spawn key is hashed into the seed entropy,
so each member index gets an independent, reproducible stream.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np
from scipy import linalg

from .errors import ConfigError, FactorizationError, PreconditionError
from .paths import DriverPath, Grid

ALGORITHM_ID = "numpy-PCG64/SeedSequence-spawn_key"
CHOLESKY_CAP = 4096


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_index: int = 0
    algorithm_id: str = ALGORITHM_ID

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed) & (2 ** 64 - 1), spawn_key=(int(self.stream_index),))
        return np.random.Generator(np.random.PCG64(ss))


def fbm_covariance(s, t, H):
    """E[B_s B_t] = (s^{2H} + t^{2H} - |t-s|^{2H}) / 2."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    h2 = 2.0 * H
    return 0.5 * (s ** h2 + t ** h2 - np.abs(t - s) ** h2)


@lru_cache(maxsize=16)
def _cholesky_factor(H, T, N):
    t = np.linspace(0.0, T, N + 1)[1:]
    cov = fbm_covariance(t[:, None], t[None, :], H)
    try:
        return linalg.cholesky(cov, lower=True)
    except linalg.LinAlgError:
        jitter = 1e-12 * float(np.max(np.diag(cov)))
        try:
            return linalg.cholesky(cov + jitter * np.eye(N), lower=True)
        except linalg.LinAlgError as exc:
            raise FactorizationError(
                f"fBm covariance not positive definite (H={H}, N={N}) even with jitter"
            ) from exc


@lru_cache(maxsize=16)
def _circulant_sqrt_eigs(H, N):
    """Square roots of the circulant embedding eigenvalues of unit-step fGn."""
    k = np.arange(N + 1, dtype=float)
    h2 = 2.0 * H
    r = 0.5 * (np.abs(k + 1) ** h2 - 2 * k ** h2 + np.abs(k - 1) ** h2)
    row = np.concatenate([r, r[-2:0:-1]])
    lam = np.fft.fft(row).real
    if np.min(lam) < -1e-10 * np.max(lam):
        raise FactorizationError(f"circulant embedding not nonnegative for H={H}, N={N}")
    return np.sqrt(np.clip(lam, 0.0, None))


def _fgn_circulant(H, N, z):
    """Unit-step fGn of length N from standard normals z with shape (2N, ...)."""
    sq = _circulant_sqrt_eigs(H, N)
    m = 2 * N
    zc = z[:m] + 1j * z[m:2 * m] if z.shape[0] >= 2 * m else None
    if zc is None:
        raise PreconditionError("circulant mode needs 4N normals per path")
    w = np.fft.fft(sq.reshape((m,) + (1,) * (z.ndim - 1)) * zc, axis=0) / np.sqrt(m)
    return w.real[:N]


def _check_hurst(H):
    # H = 1/2 is admitted as the Brownian special case
    if not (0.5 < H < 1.0 or H == 0.5):
        raise PreconditionError(f"Hurst exponent must lie in (1/2, 1), got {H}")


def _fbm_from_normals(H, grid, z, method):
    """Map normals z (n_normals, ...) to fBm values (N+1, ...) with B_0 = 0."""
    N = grid.N
    if method == "cholesky":
        L = _cholesky_factor(float(H), float(grid.T), N)
        flat = z.reshape(N, -1)
        vals = (L @ flat).reshape(z.shape)
    else:
        inc = _fgn_circulant(H, N, z) * grid.dt ** H
        vals = np.cumsum(inc, axis=0)
    return np.concatenate([np.zeros((1,) + vals.shape[1:]), vals], axis=0)


def _n_normals(grid, method):
    return grid.N if method == "cholesky" else 4 * grid.N


def _resolve_method(grid, method, cap):
    if method not in ("cholesky", "circulant"):
        raise ConfigError(f"unknown fBm method {method!r}")
    if method == "cholesky" and grid.N > cap:
        raise PreconditionError(
            f"N={grid.N} exceeds the Cholesky cap {cap}; enable method='circulant'"
        )
    return method


def sample_fbm(H, grid: Grid, rng: RngStream, dims=1, method="cholesky", cap=CHOLESKY_CAP,
               alpha=None) -> DriverPath:
    """fBm with independent components, exact in law on the grid nodes."""
    _check_hurst(H)
    method = _resolve_method(grid, method, cap)
    z = rng.generator().standard_normal((_n_normals(grid, method), dims))
    vals = _fbm_from_normals(H, grid, z, method)
    a = H - 0.05 if alpha is None else alpha
    meta = {"kind": "fbm", "H": H, "seed": rng.seed, "stream_index": rng.stream_index,
            "algorithm_id": rng.algorithm_id, "method": method, "alpha": a}
    return DriverPath(grid, vals, a, "fbm", meta)


def sample_fbm_ensemble(H, grid: Grid, seed, M, dims=1, method="cholesky", cap=CHOLESKY_CAP,
                        first_index=0):
    """(M, N+1, dims) fBm paths; member i uses stream ``first_index + i``."""
    _check_hurst(H)
    method = _resolve_method(grid, method, cap)
    n = _n_normals(grid, method)
    z = np.empty((n, M, dims))
    for i in range(M):
        z[:, i, :] = RngStream(seed, first_index + i).generator().standard_normal((n, dims))
    return np.moveaxis(_fbm_from_normals(H, grid, z, method), 1, 0)


def sample_bm(grid: Grid, rng: RngStream, dims=1) -> DriverPath:
    """W_0 = 0 with independent N(0, dt I) increments."""
    inc = rng.generator().standard_normal((grid.N, dims)) * np.sqrt(grid.dt)
    vals = np.concatenate([np.zeros((1, dims)), np.cumsum(inc, axis=0)])
    meta = {"kind": "bm", "seed": rng.seed, "stream_index": rng.stream_index,
            "algorithm_id": rng.algorithm_id}
    return DriverPath(grid, vals, 0.45, "bm", meta)


def sample_bm_ensemble(grid: Grid, seed, M, dims=1, first_index=0):
    out = np.empty((M, grid.N + 1, dims))
    for i in range(M):
        out[i] = sample_bm(grid, RngStream(seed, first_index + i), dims).values
    return out


def deterministic_driver(formula_id, params, grid: Grid, dims=1) -> DriverPath:
    """eta_t = c t (linear), c sin(omega t) (sine) or c t^a (power), per component."""
    params = dict(params or {})
    t = grid.times
    c = float(params.get("c", 1.0))
    if formula_id == "linear":
        v, alpha = c * t, 1.0
    elif formula_id == "sine":
        v, alpha = c * np.sin(float(params.get("omega", 1.0)) * t), 1.0
    elif formula_id == "power":
        a = float(params.get("a", 0.75))
        if not 0.5 < a <= 1.0:
            raise PreconditionError(f"power exponent must lie in (1/2, 1], got {a}")
        v, alpha = c * t ** a, a
    else:
        raise ConfigError(f"unknown deterministic driver {formula_id!r}")
    vals = np.repeat(v[:, None], dims, axis=1)
    return DriverPath(grid, vals, alpha, "deterministic", {"kind": "deterministic",
                                                          "formula_id": formula_id, **params})


def smooth_bump(grid: Grid):
    """C-infinity bump supported in (0, T) with maximum 1 at T/2."""
    x = 2.0 * grid.times / grid.T - 1.0
    out = np.zeros_like(x)
    inside = np.abs(x) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - x[inside] ** 2))
    return out


def metadata_text(path: DriverPath) -> str:
    meta = dict(path.meta)
    meta.update({"grid": asdict(path.grid), "N": path.grid.N, "dims": path.dims,
                 "alpha_nominal": path.alpha_nominal})
    return json.dumps(meta, indent=2, sort_keys=True) + "\n"
