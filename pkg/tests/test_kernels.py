import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cranzf import kernels

from conftest import crandn

BACKENDS = kernels.available_backends()


def test_compiled_backend_is_built():
    # the package ships the extension; a missing build is a packaging error
    assert "cython" in BACKENDS
    assert kernels.BACKEND == "cython"


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


@pytest.mark.parametrize("name", BACKENDS)
@given(st.integers(1, 6), st.integers(2, 16), st.integers(0, 2**31 - 1))
def test_zf_contract(name, K, D, seed):
    if K > D:
        return
    r = np.random.default_rng(seed)
    H = crandn(r, 3, D, K)
    W, ok = kernels.get_backend(name).zf_batch(H, 1e-12)
    assert ok.all()
    G = np.einsum("tdk,tdj->tkj", H.conj(), W)
    off = G - np.einsum("tkk->tk", G)[..., None] * np.eye(K)
    assert np.abs(off).max() / np.linalg.norm(H, axis=1).max() < 1e-10
    assert np.allclose(np.linalg.norm(W, axis=1), 1.0, atol=1e-12)


@given(st.integers(1, 8), st.integers(0, 2**31 - 1))
def test_backends_agree(K, seed):
    if len(BACKENDS) < 2:
        pytest.skip("compiled backend unavailable")
    r = np.random.default_rng(seed)
    D = K + int(r.integers(0, 8))
    H = crandn(r, 4, D, K)
    P = crandn(r, 4, D, K)
    pw = r.exponential(size=4)
    py, cy = kernels.get_backend("python"), kernels.get_backend("cython")
    Wp, okp = py.zf_batch(H, 1e-12)
    Wc, okc = cy.zf_batch(H, 1e-12)
    assert np.array_equal(okp, okc)
    # same direction up to a per-column phase
    inner = np.abs(np.einsum("tdk,tdk->tk", Wp.conj(), Wc))
    assert np.allclose(inner, 1.0, atol=1e-10)
    assert np.allclose(py.sinr_batch(H, P, pw, 0.3), cy.sinr_batch(H, P, pw, 0.3), rtol=1e-11)


@pytest.mark.parametrize("name", BACKENDS)
def test_degenerate_flag(name, rng):
    H = crandn(rng, 3, 4, 3)
    H[1, :, 2] = 2 * H[1, :, 0] - 1j * H[1, :, 1]
    H[2, :, 1] = 0.0
    _, ok = kernels.get_backend(name).zf_batch(H, 1e-12)
    assert ok.tolist() == [True, False, False]


def test_pure_python_fallback_selected_by_environment():
    code = ("import cranzf.kernels as k, cranzf.rates as r, math;"
            "from cranzf.channel import ClusterConfig;"
            "m = r.ergodic_rate_mc('standard', ClusterConfig.symmetric(2, 4, 4, 100.0), 64, 5, 3);"
            "print(k.BACKEND, repr(m.throughput.mean))")
    env = dict(os.environ, CRANZF_PURE_PYTHON="1")
    out_py = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                            text=True, check=True).stdout.split()
    env.pop("CRANZF_PURE_PYTHON")
    out_c = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                           text=True, check=True).stdout.split()
    assert out_py[0] == "python" and out_c[0] == "cython"
    assert float(out_py[1]) == pytest.approx(float(out_c[1]), rel=1e-10)
