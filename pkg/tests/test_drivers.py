import json
import math

import numpy as np
import pytest

from youngspde.drivers import (RngStream, deterministic_driver, fbm_covariance, metadata_text, sample_bm,
                               sample_bm_ensemble, sample_fbm, sample_fbm_ensemble, smooth_bump)
from youngspde.errors import ConfigError, PreconditionError
from youngspde.paths import Grid, holder_seminorm


def test_fbm_half_is_brownian_covariance():
    s, t = np.meshgrid(np.linspace(0, 1, 7), np.linspace(0, 1, 7))
    np.testing.assert_allclose(fbm_covariance(s, t, 0.5), np.minimum(s, t), atol=1e-15)


@pytest.mark.parametrize("H", [0.55, 0.75, 0.95])
def test_fbm_unit_variance_at_one(H):
    assert fbm_covariance(1.0, 1.0, H) == 1.0


def test_fbm_increment_variance():
    # E[(B_t - B_s)^2] = |t-s|^{2H} = 0.25^{1.5} = 0.125
    g = Grid(1.0, 2)
    X = sample_fbm_ensemble(0.75, g, 4, 10_000)[:, :, 0]
    sq = (X[:, 2] - X[:, 1]) ** 2
    se = sq.std(ddof=1) / math.sqrt(len(sq))
    assert abs(sq.mean() - 0.125) < 3 * se


def test_fbm_empirical_covariance():
    g = Grid(1.0, 3)
    t = g.times[1:]
    for H in (0.6, 0.75, 0.9):
        X = sample_fbm_ensemble(H, g, 1, 10_000)[:, 1:, 0]
        emp = X.T @ X / len(X)
        assert np.max(np.abs(emp - fbm_covariance(t[:, None], t[None, :], H))) < 5e-2


def test_reproducible_and_independent_streams():
    g = Grid(1.0, 6)
    a = sample_fbm(0.7, g, RngStream(9, 3), 2).values
    b = sample_fbm(0.7, g, RngStream(9, 3), 2).values
    c = sample_fbm(0.7, g, RngStream(9, 4), 2).values
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, c)
    ens = sample_fbm_ensemble(0.7, g, 9, 5, 2)
    assert ens[3].tobytes() == a.tobytes()
    assert np.all(a[0] == 0)


def test_fbm_preconditions():
    g = Grid(1.0, 4)
    with pytest.raises(PreconditionError):
        sample_fbm(0.3, g, RngStream(0))
    with pytest.raises(PreconditionError, match="circulant"):
        sample_fbm(0.7, Grid(1.0, 6), RngStream(0), cap=32)
    with pytest.raises(ConfigError):
        sample_fbm(0.7, g, RngStream(0), method="hosking")


def test_circulant_mode_has_the_fbm_law():
    g = Grid(1.0, 3)
    X = np.stack([sample_fbm(0.75, g, RngStream(2, i), method="circulant").values[1:, 0] for i in range(10_000)])
    t = g.times[1:]
    assert np.max(np.abs(X.T @ X / len(X) - fbm_covariance(t[:, None], t[None, :], 0.75))) < 5e-2
    assert sample_fbm(0.75, g, RngStream(2), method="circulant").meta["method"] == "circulant"


def test_fbm_holder_bounded_under_refinement():
    fine = Grid(1.0, 12)
    path = sample_fbm(0.75, fine, RngStream(5)).values[:, 0]
    vals = []
    for lv in range(6, 13, 2):
        g = Grid(1.0, lv)
        vals.append(holder_seminorm(path[::fine.stride_to(g)], g, 0.65))
    growth = [b / a for a, b in zip(vals, vals[1:])]
    assert max(growth) < 2.0


def test_bm_moments():
    g = Grid(2.0, 4)
    W = sample_bm_ensemble(g, 3, 10_000)[:, :, 0]
    assert np.all(W[:, 0] == 0)
    var = W[:, -1].var(ddof=1)
    assert abs(var - 2.0) < 3 * var * math.sqrt(2 / (len(W) - 1))
    d = np.diff(W, axis=1)
    rho = np.corrcoef(d[:, 2], d[:, 9])[0, 1]
    assert abs(rho) < 3 / math.sqrt(len(W))


def test_bm_quadratic_variation():
    # E QV = T, Var QV = 2 T^2 / N
    g = Grid(1.0, 10)
    qv = np.array([np.sum(np.diff(sample_bm(g, RngStream(7, i)).values[:, 0]) ** 2) for i in range(200)])
    assert abs(qv.mean() - 1.0) < 3 * math.sqrt(2 / g.N / len(qv))


def test_deterministic_drivers():
    g = Grid(1.0, 8)
    lin = deterministic_driver("linear", {"c": 1.0}, g)
    assert holder_seminorm(lin.values[:, 0], g, 0.6) == pytest.approx(1.0, abs=1e-12)
    sine = deterministic_driver("sine", {"omega": 2.0}, g, dims=2)
    np.testing.assert_allclose(sine.values[:, 1], np.sin(2 * g.times))
    pw = deterministic_driver("power", {"a": 0.75}, g).values[:, 0]
    t = g.times
    # brute force over all pairs
    dt = t[None, :] - t[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(dt > 0, np.abs(pw[None, :] - pw[:, None]) / np.where(dt > 0, dt, 1) ** 0.75, 0)
    assert ratio.max() == pytest.approx(1.0, abs=1e-12)
    assert holder_seminorm(pw, g, 0.75) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ConfigError):
        deterministic_driver("cubic", {}, g)
    with pytest.raises(PreconditionError):
        deterministic_driver("power", {"a": 0.4}, g)


def test_smooth_bump_and_metadata():
    g = Grid(1.0, 4)
    b = smooth_bump(g)
    assert b[0] == 0 and b[-1] == 0 and b[8] == pytest.approx(1.0)
    meta = json.loads(metadata_text(sample_fbm(0.8, g, RngStream(11, 2))))
    assert meta["H"] == 0.8 and meta["seed"] == 11 and meta["stream_index"] == 2
    assert meta["algorithm_id"] and meta["alpha"] == pytest.approx(0.75)
