import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from cranzf.bounds import calU
from cranzf.rvq import (
    B_MAX_EXPLICIT,
    quantize_block,
    quantize_csi_set,
    quantize_explicit,
    quantize_surrogate,
    surrogate_error,
)

from conftest import crandn


def _check_result(v, r):
    vbar = v / np.linalg.norm(v)
    c, s, Z = r.quantized_direction, r.error_direction, r.Z
    assert 0.0 <= Z <= 1.0
    assert np.linalg.norm(c) == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.norm(s) == pytest.approx(1.0, abs=1e-12)
    assert abs(np.vdot(c, s)) < 1e-10
    assert np.allclose(vbar, math.sqrt(1 - Z) * c + math.sqrt(Z) * s, atol=1e-10)
    # phase aligned: c^H v real and nonnegative
    ip = np.vdot(c, vbar)
    assert ip.real >= 0 and abs(ip.imag) < 1e-12


@given(st.integers(2, 8), st.integers(0, 10), st.integers(0, 2**31 - 1))
def test_explicit_reconstruction(N, b, seed):
    r = np.random.default_rng(seed)
    v = crandn(r, N)
    _check_result(v, quantize_explicit(v, b, r))


@given(st.integers(2, 16), st.floats(1, 200), st.integers(0, 2**31 - 1))
def test_surrogate_reconstruction(N, b, seed):
    r = np.random.default_rng(seed)
    v = crandn(r, N)
    _check_result(v, quantize_surrogate(v, b, r))


def test_planted_codeword_gives_zero_error(rng):
    v = crandn(rng, 4)
    book = np.vstack([crandn(rng, 4) for _ in range(7)] + [1j * v])
    r = quantize_explicit(v, 3, rng, codebook=book)
    assert r.Z == pytest.approx(0.0, abs=1e-14)
    assert np.allclose(r.quantized_direction, v / np.linalg.norm(v), atol=1e-12)


def test_explicit_n2_b1_mean():
    rng = np.random.default_rng(3)
    V = crandn(rng, 100_000, 2)
    _, Z = quantize_block(V, 1, "explicit", rng)
    se = Z.std(ddof=1) / math.sqrt(Z.size)
    assert abs(Z.mean() - 1 / 3) <= 4 * se


def test_explicit_single_codeword_is_uniform():
    rng = np.random.default_rng(4)
    V = crandn(rng, 20_000, 2)
    _, Z = quantize_block(V, 0, "explicit", rng)
    assert stats.kstest(Z, "uniform").pvalue > 0.01


def test_surrogate_endpoint():
    assert surrogate_error(0.0, 8, 4) == 0.0
    assert surrogate_error(1e-300, 30, 8) < 1e-30
    assert surrogate_error(1.0, 3, 5) == pytest.approx(1.0)
    assert np.all(np.diff(surrogate_error(np.linspace(0, 1, 50), 4, 3)) >= 0)


def test_surrogate_matches_explicit_ks():
    rng = np.random.default_rng(5)
    V = crandn(rng, 10_000, 4)
    _, Ze = quantize_block(V, 6, "explicit", rng)
    _, Zs = quantize_block(V, 6, "surrogate", rng)
    res = stats.ks_2samp(Ze, Zs)
    crit = 1.628 * math.sqrt(2 / 10_000)  # 1% two-sample critical value
    assert res.statistic < crit


def test_sqrt_moment_identity_large_b():
    rng = np.random.default_rng(6)
    u = rng.random(200_000)
    Z = surrogate_error(u, 16, 8)
    x = np.sqrt(Z)
    se = x.std(ddof=1) / math.sqrt(x.size)
    assert abs(x.mean() - calU(2.0**16, 0.5 / 7)) <= 4 * se


@pytest.mark.parametrize("N,b", [(2, 2), (4, 4), (8, 8), (4, 12)])
def test_moment_identity_surrogate(N, b):
    rng = np.random.default_rng(N * 100 + b)
    Z = surrogate_error(rng.random(100_000), b, N)
    se = Z.std(ddof=1) / math.sqrt(Z.size)
    assert abs(Z.mean() - calU(2.0**b, 1 / (N - 1))) <= 4 * se


@pytest.mark.parametrize("N,b", [(2, 1), (2, 4), (4, 2), (4, 8), (8, 4), (8, 12)])
def test_mean_error_upper_bound(N, b):
    rng = np.random.default_rng(7)
    Z = surrogate_error(rng.random(50_000), b, N)
    se = Z.std(ddof=1) / math.sqrt(Z.size)
    assert Z.mean() <= 2.0 ** (-b / (N - 1)) + 4 * se


def test_phase_invariance(rng):
    v = crandn(rng, 4)
    a = quantize_explicit(v, 5, np.random.default_rng(9))
    b = quantize_explicit(np.exp(1.3j) * v, 5, np.random.default_rng(9))
    assert a.Z == pytest.approx(b.Z, abs=1e-14)
    s1 = quantize_surrogate(v, 5, np.random.default_rng(9))
    s2 = quantize_surrogate(np.exp(1.3j) * v, 5, np.random.default_rng(9))
    assert s1.Z == s2.Z


def test_quantize_block_zero_rows_consume_no_randomness(rng):
    V = crandn(rng, 5, 3)
    W = np.insert(V, [1, 3], 0.0, axis=0)
    a, Za = quantize_block(V, 7, "surrogate", np.random.default_rng(1))
    b, Zb = quantize_block(W, 7, "surrogate", np.random.default_rng(1))
    keep = np.linalg.norm(W, axis=1) > 0
    assert np.array_equal(b[keep], a) and np.array_equal(Zb[keep], Za)
    assert np.all(b[~keep] == 0) and np.all(Zb[~keep] == 0)


def test_quantize_block_magnitudes_exact(rng):
    V = crandn(rng, 6, 4)
    est, _ = quantize_block(V, 3, "surrogate", rng)
    assert np.allclose(np.linalg.norm(est, axis=1), np.linalg.norm(V, axis=1), rtol=1e-13)


def test_infinite_bits_is_exact(rng):
    h = crandn(rng, 3, 2, 4)
    q = quantize_csi_set(h, math.inf, "surrogate", rng)
    assert np.allclose(q.h_hat, h, atol=1e-14)
    assert np.all(q.Z == 0)


def test_single_block_reduction():
    h = crandn(np.random.default_rng(0), 1, 1, 5)
    q = quantize_csi_set(h, 6, "surrogate", np.random.default_rng(2))
    r = quantize_surrogate(h[0, 0], 6, np.random.default_rng(2))
    assert np.allclose(q.directions[0, 0], r.quantized_direction, atol=1e-14)
    assert q.Z[0, 0] == pytest.approx(r.Z, abs=1e-15)
    assert q.magnitudes[0, 0] == pytest.approx(np.linalg.norm(h))
    assert np.array_equal(q.stacked(0), q.h_hat[0].reshape(-1))


def test_independent_codebooks():
    # 1e5 trials: SE of a correlation is ~0.003, so the 0.02 bar is ~6 SE
    rng = np.random.default_rng(8)
    n = 100_000
    h = crandn(rng, 2, 3, 4)
    Zs = np.empty((n, 6))
    for t in range(n):
        Zs[t] = quantize_csi_set(h, 3, "surrogate", rng).Z.ravel()
    C = np.corrcoef(Zs.T)
    assert np.abs(C[~np.eye(6, dtype=bool)]).max() < 0.02


def test_errors(rng):
    with pytest.raises(ValueError):
        quantize_explicit(np.zeros(3), 2, rng)
    with pytest.raises(ValueError):
        quantize_explicit(crandn(rng, 3), B_MAX_EXPLICIT + 1, rng)
    with pytest.raises(ValueError):
        quantize_surrogate(crandn(rng, 1), 3, rng)
    with pytest.raises(ValueError):
        quantize_csi_set(crandn(rng, 1, 1, 3), 0, "surrogate", rng)
    with pytest.raises(ValueError):
        quantize_block(crandn(rng, 2, 3), 2, "lloyd", rng)
