import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from cranzf.channel import (
    MIN_DISTANCE_KM,
    ChannelSet,
    ClusterConfig,
    HexGeometry,
    draw_channel_array,
    generate_channels,
    pathloss_alpha,
    pathloss_db,
    place_random,
    symmetric_alpha,
)


def test_pathloss_examples():
    assert pathloss_db(0.1) == pytest.approx(-90.4, abs=1e-12)
    assert pathloss_db(1.0) == -128.0
    assert pathloss_db(0.05) == pytest.approx(-128.0 + 37.6 * math.log10(20.0), abs=1e-12)
    assert round(pathloss_db(0.05), 1) == -79.1
    assert pathloss_alpha(np.array([[1.0]]))[0, 0] == pytest.approx(10**-12.8)


def test_pathloss_rejects_short_distance():
    with pytest.raises(ValueError):
        pathloss_db(0.005)


def test_symmetric_alpha():
    a = symmetric_alpha(4, 8)
    assert a.shape == (4, 8) and np.all(a == 0.25)
    assert symmetric_alpha(1, 1)[0, 0] == 1.0
    assert np.allclose(a.sum(axis=0), 1.0)


def test_config_validation():
    with pytest.raises(ValueError):
        ClusterConfig(2, 2, 2, 0.0, 1.0, np.ones((2, 2)))
    with pytest.raises(ValueError):
        ClusterConfig(2, 2, 2, 1.0, 1.0, np.ones((2, 3)))
    with pytest.raises(ValueError):
        ClusterConfig(2, 2, 2, 1.0, 1.0, np.zeros((2, 2)))
    cfg = ClusterConfig.symmetric(4, 8, 8, 10.0)
    with pytest.raises(ValueError):
        cfg.alpha[0, 0] = 1.0  # immutable
    assert cfg.with_nt(3).Nt == 3


def test_channel_second_moment():
    rng = np.random.default_rng(1)
    h = draw_channel_array(rng, np.ones((1, 100_000)), 8)  # (Q, M, Nt)
    e = np.sum(np.abs(h) ** 2, axis=-1).ravel()
    assert abs(e.mean() - 8.0) <= 4 * e.std(ddof=1) / math.sqrt(e.size)
    # per-entry variance alpha, alpha/2 per real component
    assert np.var(h.real) == pytest.approx(0.5, rel=0.02)
    assert np.var(h.imag) == pytest.approx(0.5, rel=0.02)
    assert abs(np.mean(h.real * h.imag)) < 0.01


def test_channel_variance_follows_alpha():
    rng = np.random.default_rng(2)
    alpha = np.array([[0.1, 2.0], [1e-3, 5.0]])  # (M, Q)
    acc = np.zeros((2, 2))
    n = 20_000
    for _ in range(n // 1000):
        h = np.stack([draw_channel_array(rng, alpha, 4) for _ in range(1000)])
        acc += np.mean(np.abs(h) ** 2, axis=(0, 3)).T
    assert np.allclose(acc / (n // 1000), alpha, rtol=0.03)


def test_channel_tiny_alpha_gives_tiny_vector():
    h = draw_channel_array(np.random.default_rng(0), np.array([[1e-300]]), 4)
    assert np.linalg.norm(h) < 1e-140


def test_generate_channels_deterministic_and_stacked():
    cfg = ClusterConfig.symmetric(3, 4, 2, 1.0)
    a = generate_channels(cfg, np.random.default_rng(5))
    b = generate_channels(cfg, np.random.default_rng(5))
    assert isinstance(a, ChannelSet)
    assert np.array_equal(a.h, b.h)
    assert (a.Q, a.M, a.Nt) == (4, 3, 2)
    for q in range(4):
        assert np.array_equal(a.stacked(q), np.concatenate([a.h[q, m] for m in range(3)]))
        assert np.array_equal(a.stacked_matrix()[:, q], a.stacked(q))


def test_hex_geometry_defaults():
    g = HexGeometry()
    c = g.srrh_positions
    assert c.shape == (4, 2)
    d = np.linalg.norm(c[:, None] - c[None], axis=-1)
    # neighbours at sqrt(3) * edge
    assert np.isclose(np.sort(d[0])[1], math.sqrt(3) * 100)
    assert g.contains(c).all()
    assert not g.contains(np.array([[1e4, 1e4]])).any()


@given(st.integers(0, 2**31 - 1), st.integers(1, 12))
def test_placement_respects_exclusion(seed, Q):
    p = place_random(HexGeometry(), Q, np.random.default_rng(seed))
    assert p.ms_positions.shape == (Q, 2)
    assert np.all(p.distances_km >= MIN_DISTANCE_KM)
    assert HexGeometry().contains(p.ms_positions).all()


def test_placement_deterministic():
    a = place_random(HexGeometry(), 8, np.random.default_rng(3))
    b = place_random(HexGeometry(), 8, np.random.default_rng(3))
    assert np.array_equal(a.ms_positions, b.ms_positions)
    assert np.array_equal(a.alpha(), b.alpha())


def test_placement_uniform_chi2():
    geo = HexGeometry()
    rng = np.random.default_rng(11)
    pts = np.concatenate([place_random(geo, 1, rng).ms_positions for _ in range(10_000)])
    x0, x1, y0, y1 = geo.bounding_box()
    nx, ny = 12, 10
    counts, xe, ye = np.histogram2d(pts[:, 0], pts[:, 1], bins=[nx, ny], range=[[x0, x1], [y0, y1]])
    # expected mass per cell from a fine lattice over the admissible region
    gx = np.linspace(x0, x1, 1200)
    gy = np.linspace(y0, y1, 1000)
    X, Y = np.meshgrid(gx, gy, indexing="ij")
    P = np.column_stack([X.ravel(), Y.ravel()])
    ok = geo.contains(P)
    dmin = np.min(np.linalg.norm(P[:, None, :] - geo.srrh_positions[None], axis=-1), axis=1)
    ok &= dmin >= MIN_DISTANCE_KM * 1000
    mass, _, _ = np.histogram2d(P[ok, 0], P[ok, 1], bins=[xe, ye])
    expected = mass / mass.sum() * len(pts)
    use = expected >= 5
    # cells the lattice says are empty must be (nearly) empty in the sample too
    assert counts[expected == 0].sum() <= 3
    obs = counts[use]
    exp_ = expected[use] * obs.sum() / expected[use].sum()
    chi2, p = stats.chisquare(obs, exp_)
    assert p > 0.01, (chi2, p)
