"""Diagonal semigroups and the spectral heat semigroup on the torus.

A field is stored as an array whose trailing axes are ``(l, *mode_shape)``:
one component axis followed by the mode axes of the semigroup. Any number
of leading axes (time, ensemble member, driver component, ...) is allowed
and every operation broadcasts over them.

On the torus T^n = [0, 2*pi)^n the modes are k in {-K..K}^n in centred
order (array index i <-> wavenumber i - K). The discrete Fourier transform
pair is

    u_hat[k] = P^{-n} sum_x u(x) exp(-i k.x),    x_j = 2*pi*j/P,
    u(x)     = sum_k u_hat[k] exp(i k.x),

i.e. the forward transform carries the 1/(grid size) normalisation.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    AliasingError,
    PreconditionError,
    SingularModeError,
    TruncationMismatchError,
)


def phi1(x):
    """(1 - e^{-x}) / x with phi1(0) = 1, stable near zero."""
    x = np.asarray(x, dtype=float)
    out = np.ones_like(x)
    nz = np.abs(x) > 1e-8
    out[nz] = -np.expm1(-x[nz]) / x[nz]
    small = ~nz
    out[small] = 1.0 - x[small] / 2.0
    return out


def phi2(x):
    """(x - 1 + e^{-x}) / x^2 with phi2(0) = 1/2."""
    x = np.asarray(x, dtype=float)
    out = np.full_like(x, 0.5)
    nz = np.abs(x) > 1e-4
    out[nz] = (x[nz] + np.expm1(-x[nz])) / x[nz] ** 2
    small = ~nz
    out[small] = 0.5 - x[small] / 6.0 + x[small] ** 2 / 24.0
    return out


def ou_weight(x):
    """sqrt((1 - e^{-2x}) / (2x)), with value 1 at x = 0."""
    return np.sqrt(phi1(2.0 * np.asarray(x, dtype=float)))


class DiagonalSemigroup:
    """S_t = exp(-t q) acting mode-wise, with norm weights ``w``.

    ``q`` are the (nonnegative) generator values -L on each mode and ``w``
    the weights of the interpolation norm |u|_gamma^2 = sum w^{2 gamma} |u|^2.
    A scalar ``q`` of 0 gives the identity semigroup on plain vectors.
    """

    def __init__(self, q, weights=None):
        q = np.asarray(q, dtype=float)
        if np.any(q < 0):
            raise PreconditionError("generator values q must be >= 0")
        self.q = q
        self.weights = np.ones_like(q) if weights is None else np.asarray(weights, dtype=float)
        if self.weights.shape != q.shape:
            raise TruncationMismatchError("weights and q must have the same shape")

    @property
    def mode_shape(self):
        return self.q.shape

    @property
    def field_ndim(self):
        """Number of trailing axes of a field (component axis + mode axes)."""
        return 1 + self.q.ndim

    def key(self):
        return ("diag", self.q.shape, self.q.tobytes(), self.weights.tobytes())

    def check_field(self, u):
        u = np.asarray(u)
        if u.ndim < self.field_ndim or u.shape[u.ndim - self.q.ndim:] != self.q.shape:
            raise TruncationMismatchError(
                f"field trailing shape {u.shape} does not match modes {self.q.shape}"
            )
        return u

    # -- semigroup -----------------------------------------------------
    def _broadcast(self, t, ndim):
        """Reshape an array of times so it lines up with the leading axes."""
        t = np.asarray(t, dtype=float)
        pad = ndim - t.ndim - self.q.ndim
        return t.reshape(t.shape + (1,) * pad + (1,) * self.q.ndim)

    def multiplier(self, t):
        t = np.asarray(t, dtype=float)
        return np.exp(-np.multiply.outer(t, self.q))

    def apply(self, t, u):
        """S_t u. ``t`` may be an array aligned with the leading axes of ``u``."""
        u = self.check_field(u)
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise PreconditionError("semigroup time must be nonnegative")
        if t.ndim == 0:
            return u * np.exp(-float(t) * self.q)
        tb = self._broadcast(t, u.ndim)
        return u * np.exp(-tb * self.q)

    def frac_power(self, gamma, u, mode="generator"):
        """Multiply mode-wise by q^gamma (generator mode) or w^gamma (norm mode)."""
        u = self.check_field(u)
        if mode == "norm":
            base = self.weights
        elif mode == "generator":
            base = self.q
            if gamma < 0 and np.any(base == 0):
                raise SingularModeError(
                    "(-L)^gamma with gamma < 0 is singular at a zero mode; use norm mode or mass > 0"
                )
        else:
            raise ValueError(f"unknown mode {mode!r}")
        with np.errstate(divide="ignore"):
            mult = np.where(base == 0, 1.0 if gamma == 0 else 0.0, np.abs(base) ** gamma)
        return u * mult

    def norm(self, u, gamma=0.0):
        """|u|_gamma over the trailing field axes."""
        u = self.check_field(u)
        w2 = self.weights ** (2.0 * gamma)
        axes = tuple(range(u.ndim - self.field_ndim, u.ndim))
        return np.sqrt(np.sum(w2 * (u.real ** 2 + u.imag ** 2), axis=axes))

    def norm_fn(self, gamma=0.0) -> Callable:
        return lambda u: self.norm(u, gamma)

    def constant(self, c, l=1):
        """The field representing the constant function c (all modes here)."""
        return np.full((l,) + self.q.shape, float(c), dtype=complex)

    def zeros(self, l=1, lead=()):
        return np.zeros(tuple(lead) + (l,) + self.q.shape, dtype=complex)

    def smoothing_constant_probe(self, gamma1, gamma2, t_list, fields=None, weights="norm"):
        """max over t and probe fields of t^{g2-g1} |S_t u|_{g2} / |u|_{g1}.

        Without explicit probe fields the basis modes are used, for which
        the ratio is t^theta w^theta exp(-t q) mode by mode. With
        ``weights="generator"`` the powers of -L replace the norm weights,
        and the ratio is (t q)^theta exp(-t q), whose supremum is the
        one-mode constant (theta/e)^theta.
        """
        if gamma1 > gamma2:
            raise PreconditionError("smoothing probe needs gamma1 <= gamma2")
        theta = gamma2 - gamma1
        t = np.asarray(t_list, dtype=float)
        if np.any(t <= 0):
            raise PreconditionError("probe times must be positive")
        if fields is None:
            q = self.q.ravel()
            w = q if weights == "generator" else self.weights.ravel()
            vals = t[:, None] ** theta * w[None, :] ** theta * np.exp(-t[:, None] * q[None, :])
            return float(vals.max())
        best = 0.0
        for u in fields:
            den = self.norm(u, gamma1)
            for tt in t:
                best = max(best, float(tt ** theta * self.norm(self.apply(tt, u), gamma2) / den))
        return best


def identity_semigroup():
    """S_t = I on plain vectors (trailing shape ``(e,)``)."""
    return DiagonalSemigroup(0.0)


def single_mode(kappa, weight=None):
    """One mode with generator value ``kappa``; fields have shape (l, 1)."""
    q = np.array([float(kappa)])
    w = None if weight is None else np.array([float(weight)])
    return DiagonalSemigroup(q, w)


class HeatSemigroup(DiagonalSemigroup):
    """e^{t(Delta - m0)} on T^n truncated to |k_i| <= K.

    Generator values q(k) = |k|^2 + m0; norm weights m1 + |k|^2 with
    m1 = max(m0, 1), so |.|_gamma is an H^{2 gamma} norm even when q(0) = 0.
    """

    def __init__(self, n=1, K=16, mass=0.0, grid_size=None):
        if n < 1 or K < 0:
            raise PreconditionError("need n >= 1 and K >= 0")
        if mass < 0:
            raise PreconditionError("mass shift m0 must be >= 0")
        self.n = int(n)
        self.K = int(K)
        self.mass = float(mass)
        self.norm_mass = max(self.mass, 1.0)
        ks = np.arange(-self.K, self.K + 1)
        self.wavenumbers = np.stack(np.meshgrid(*([ks] * self.n), indexing="ij"))
        ksq = np.sum(self.wavenumbers.astype(float) ** 2, axis=0)
        self.ksq = ksq
        super().__init__(ksq + self.mass, ksq + self.norm_mass)
        # 2/3 rule: products of band-K fields are exact up to |k| <= K on P >= 3K+1
        self.grid_size = int(grid_size) if grid_size is not None else 3 * self.K + 1
        if self.grid_size < 2 * self.K + 1:
            raise AliasingError(
                f"spatial grid {self.grid_size} too small for cutoff K={self.K} (need >= {2 * self.K + 1})"
            )
        self._index = np.arange(-self.K, self.K + 1) % self.grid_size

    def key(self):
        return ("torus", self.n, self.K, self.mass)

    def __repr__(self):
        return f"HeatSemigroup(n={self.n}, K={self.K}, mass={self.mass})"

    def constant(self, c, l=1):
        u = self.zeros(l)
        u[(slice(None),) + (self.K,) * self.n] = c
        return u

    def points(self, P=None):
        P = self.grid_size if P is None else P
        x = 2 * np.pi * np.arange(P) / P
        return np.stack(np.meshgrid(*([x] * self.n), indexing="ij"))

    def _take(self, P):
        idx = np.arange(-self.K, self.K + 1) % P
        return np.ix_(*([idx] * self.n))

    def analyze(self, phys, P=None):
        """Physical samples (..., l, P, ..., P) -> coefficients (..., l, 2K+1, ...)."""
        phys = np.asarray(phys)
        P = phys.shape[-1] if P is None else P
        if P < 2 * self.K + 1:
            raise AliasingError(f"grid size {P} < 2K+1 = {2 * self.K + 1}")
        if phys.shape[phys.ndim - self.n:] != (P,) * self.n:
            raise TruncationMismatchError(f"physical array shape {phys.shape} is not (..., {P})^n")
        axes = tuple(range(phys.ndim - self.n, phys.ndim))
        spec = np.fft.fftn(phys, axes=axes) / P ** self.n
        return spec[(Ellipsis,) + self._take(P)]

    def synthesize(self, u, P=None):
        """Coefficients -> real physical samples on a P^n grid."""
        u = self.check_field(u)
        P = self.grid_size if P is None else P
        if P < 2 * self.K + 1:
            raise AliasingError(f"grid size {P} < 2K+1 = {2 * self.K + 1}")
        full = np.zeros(u.shape[: u.ndim - self.n] + (P,) * self.n, dtype=complex)
        full[(Ellipsis,) + self._take(P)] = u
        axes = tuple(range(full.ndim - self.n, full.ndim))
        return np.fft.ifftn(full, axes=axes).real * P ** self.n

    def gradient(self, u):
        """Spectral gradient; the direction axis is inserted before the component axis."""
        u = self.check_field(u)
        k = self.wavenumbers.astype(float)
        lead = u.ndim - self.field_ndim
        out = 1j * k.reshape((self.n, 1) + self.mode_shape) * np.expand_dims(u, lead)
        return out

    def symmetrize(self, u):
        """Project onto conjugate-symmetric coefficients (real physical fields)."""
        u = self.check_field(u)
        axes = tuple(range(u.ndim - self.n, u.ndim))
        flipped = np.flip(u, axis=axes)
        return 0.5 * (u + np.conj(flipped))

    def random_field(self, rng, l=1, decay=1.0, lead=()):
        """Random real field with coefficients ~ (1+|k|^2)^{-decay} N(0,1)."""
        shape = tuple(lead) + (l,) + self.mode_shape
        z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        u = z * (1.0 + self.ksq) ** (-decay)
        return self.symmetrize(u)

    def mode_field(self, k, amplitude=1.0, l=1, component=0):
        """Real field amplitude*cos(k.x) for k != 0 (or the constant for k = 0)."""
        u = self.zeros(l)
        k = tuple(int(v) for v in np.atleast_1d(k))
        if all(v == 0 for v in k):
            u[(component,) + (self.K,) * self.n] = amplitude
            return u
        pos = tuple(self.K + v for v in k)
        neg = tuple(self.K - v for v in k)
        u[(component,) + pos] += amplitude / 2
        u[(component,) + neg] += amplitude / 2
        return u


@dataclass
class SpectralField:
    """Truncated Fourier coefficients of an R^l-valued field on T^n."""

    coeffs: np.ndarray
    n: int
    K: int

    @property
    def l(self):
        return self.coeffs.shape[0]

    def is_real(self, tol=1e-12):
        axes = tuple(range(1, 1 + self.n))
        flipped = np.conj(np.flip(self.coeffs, axis=axes))
        return bool(np.max(np.abs(self.coeffs - flipped), initial=0.0) <= tol * max(1.0, np.abs(self.coeffs).max(initial=0.0)))


def field_to_csv(u, n, K) -> str:
    """Serialise coefficients (l, 2K+1, ...) as rows k_1..k_n,component,re,im."""
    u = np.asarray(u)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"k_{i + 1}" for i in range(n)] + ["component", "re", "im"])
    for c in range(u.shape[0]):
        for idx in np.ndindex(*u.shape[1:]):
            v = u[(c,) + idx]
            w.writerow([i - K for i in idx] + [c, format(v.real, ".17g"), format(v.imag, ".17g")])
    return buf.getvalue()


def field_from_csv(text) -> SpectralField:
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], [r for r in rows[1:] if r]
    n = sum(1 for h in header if h.startswith("k_"))
    ks = np.array([[int(v) for v in r[:n]] for r in body])
    K = int(np.abs(ks).max()) if len(ks) else 0
    l = max(int(r[n]) for r in body) + 1
    u = np.zeros((l,) + (2 * K + 1,) * n, dtype=complex)
    for r, k in zip(body, ks):
        u[(int(r[n]),) + tuple(k + K)] = float(r[n + 1]) + 1j * float(r[n + 2])
    return SpectralField(u, n, K)


def sup_weight_ratio(sg: DiagonalSemigroup, theta: float) -> float:
    """sup over modes with q > 0 of (w/q)^theta."""
    pos = sg.q > 0
    if not np.any(pos):
        return 1.0
    return float(np.max((sg.weights[pos] / sg.q[pos]) ** theta))


def one_mode_smoothing_constant(theta: float) -> float:
    """max_{x>0} x^theta e^{-x} = (theta/e)^theta, equal to 1 at theta = 0."""
    if theta == 0:
        return 1.0
    return (theta / math.e) ** theta
