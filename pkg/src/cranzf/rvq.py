"""Random vector quantization (RVQ) of unit directions.

Two interchangeable quantizers are provided:

* ``explicit`` draws a codebook of ``2**b`` i.i.d. isotropic unit vectors and
  picks the codeword with the largest ``|v^H c|``;
* ``surrogate`` samples the quantization error ``Z = sin^2(theta)`` directly
  from its law (minimum of ``2**b`` Beta(N-1, 1) variates) together with an
  isotropic error direction. It has the same joint distribution and is the
  only practical option for large ``b``.

Quantized directions are phase-aligned with the input (``c^H v >= 0``), so
``v = sqrt(1-Z) c + sqrt(Z) s`` holds exactly with ``s`` orthogonal to ``c``.
Vector magnitudes are never quantized.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import orthonormal_null_basis

__all__ = [
    "B_MAX_EXPLICIT",
    "RvqResult",
    "QuantizedCSI",
    "quantize_explicit",
    "quantize_surrogate",
    "quantize_block",
    "quantize_csi_set",
    "surrogate_error",
]

#: Largest codebook (in bits) the explicit quantizer will build.
B_MAX_EXPLICIT = 22

_CHUNK = 1 << 15
_ZERO_TOL = 1e-300


@dataclass
class RvqResult:
    quantized_direction: np.ndarray
    Z: float
    error_direction: np.ndarray


@dataclass
class QuantizedCSI:
    """Quantized per-block CSI as seen by the central unit.

    ``magnitudes`` (Q, M) are exact; ``directions`` (Q, M, N) are unit
    vectors, or zero rows for blocks that were not sent.
    """

    magnitudes: np.ndarray
    directions: np.ndarray
    Z: np.ndarray

    @property
    def h_hat(self) -> np.ndarray:
        """Per-block estimates ``|h| * c``, shape (Q, M, N)."""
        return self.magnitudes[..., None] * self.directions

    def stacked(self, q: int) -> np.ndarray:
        return self.h_hat[q].reshape(-1)

    def stacked_matrix(self) -> np.ndarray:
        Q = self.magnitudes.shape[0]
        return self.h_hat.reshape(Q, -1).T


def _unit(v):
    v = np.asarray(v, dtype=complex).reshape(-1)
    n = np.linalg.norm(v)
    if not n > 0:
        raise ValueError("cannot quantize a zero vector")
    return v / n


def _complex_normal(rng, shape):
    g = rng.standard_normal(tuple(shape) + (2,))
    return g[..., 0] + 1j * g[..., 1]


def _error_direction(vbar, c, Z):
    if Z > 1e-24:
        s = (vbar - np.sqrt(1.0 - Z) * c) / np.sqrt(Z)
        return s / np.linalg.norm(s)
    return orthonormal_null_basis([c], c.shape[0])[:, 0]


def _best_codeword(vbar: np.ndarray, b: int, rng: np.random.Generator):
    n_code = 1 << b
    N = vbar.shape[0]
    best_val, best_c = -1.0, None
    done = 0
    while done < n_code:
        k = min(_CHUNK, n_code - done)
        C = _complex_normal(rng, (k, N))
        C /= np.linalg.norm(C, axis=1, keepdims=True)
        corr = np.abs(C.conj() @ vbar)
        i = int(np.argmax(corr))  # first maximum -> lowest index
        if corr[i] > best_val:
            best_val, best_c = corr[i], C[i].copy()
        done += k
    return best_c


def quantize_explicit(v, b: int, rng: np.random.Generator, codebook=None) -> RvqResult:
    """Quantize the direction of ``v`` against a random ``2**b`` codebook.

    ``codebook`` (rows are codewords) overrides the random draw; it is used
    in tests to plant a known codeword.
    """
    vbar = _unit(v)
    N = vbar.shape[0]
    if N < 2:
        raise ValueError("RVQ needs dimension >= 2")
    if codebook is None:
        if not 0 <= b <= B_MAX_EXPLICIT:
            raise ValueError(f"explicit RVQ supports 0 <= b <= {B_MAX_EXPLICIT}, got {b}")
        c = _best_codeword(vbar, int(b), rng)
    else:
        C = np.asarray(codebook, dtype=complex)
        C = C / np.linalg.norm(C, axis=1, keepdims=True)
        c = C[int(np.argmax(np.abs(C.conj() @ vbar)))]
    inner = np.vdot(c, vbar)
    c = c * np.exp(1j * np.angle(inner))
    Z = float(min(max(1.0 - abs(inner) ** 2, 0.0), 1.0))
    return RvqResult(c, Z, _error_direction(vbar, c, Z))


def surrogate_error(u, b, N: int):
    """Inverse CDF of the minimum of ``2**b`` Beta(N-1, 1) variates at ``u``."""
    u = np.asarray(u, dtype=float)
    if N < 2:
        return np.zeros_like(u)
    scale = np.exp2(-np.asarray(b, dtype=float))
    with np.errstate(divide="ignore"):  # u = 1 maps to Z = 1
        return (-np.expm1(np.log1p(-u) * scale)) ** (1.0 / (N - 1))


def _surrogate_apply(vbar, Z, w):
    # isotropic unit direction orthogonal to vbar, built from a Gaussian draw
    g = w - vbar * np.sum(vbar.conj() * w, axis=-1, keepdims=True)
    g /= np.linalg.norm(g, axis=-1, keepdims=True)
    sz = np.sqrt(Z)[..., None]
    cz = np.sqrt(1.0 - Z)[..., None]
    return cz * vbar + sz * g, sz * vbar - cz * g


def quantize_surrogate(v, b, rng: np.random.Generator) -> RvqResult:
    """Draw the RVQ output for ``v`` from the exact error law (any ``b``)."""
    vbar = _unit(v)
    N = vbar.shape[0]
    if N < 2:
        raise ValueError("RVQ needs dimension >= 2")
    u = rng.random()
    w = _complex_normal(rng, (N,))
    Z = float(surrogate_error(u, b, N))
    c, s = _surrogate_apply(vbar, np.asarray(Z), w)
    return RvqResult(c, Z, s)


def quantize_block(V: np.ndarray, b, mode: str, rng: np.random.Generator):
    """Quantize every nonzero row of ``V`` (K, N) independently.

    Returns ``(estimates, Z)`` where ``estimates[k] = |V[k]| * c_k``; zero
    rows stay exactly zero and consume no randomness. Randomness is drawn in
    row order, so results do not depend on how rows are batched elsewhere.
    One-dimensional rows are reproduced exactly (direction is a phase).
    """
    V = np.asarray(V, dtype=complex)
    K, N = V.shape
    mags = np.linalg.norm(V, axis=1)
    active = np.flatnonzero(mags > _ZERO_TOL)
    out = np.zeros_like(V)
    Z = np.zeros(K)
    if active.size == 0:
        return out, Z
    if N == 1 or b == np.inf:
        out[active] = V[active]
        return out, Z
    vbar = V[active] / mags[active, None]
    if mode == "surrogate":
        u = rng.random(active.size)
        w = _complex_normal(rng, (active.size, N))
        Za = surrogate_error(u, b, N)
        c, _ = _surrogate_apply(vbar, Za, w)
    elif mode == "explicit":
        b = int(b)
        if not 0 <= b <= B_MAX_EXPLICIT:
            raise ValueError(f"explicit RVQ supports 0 <= b <= {B_MAX_EXPLICIT}, got {b}")
        c = np.empty_like(vbar)
        Za = np.empty(active.size)
        for i in range(active.size):
            ci = _best_codeword(vbar[i], b, rng)
            inner = np.vdot(ci, vbar[i])
            c[i] = ci * np.exp(1j * np.angle(inner))
            Za[i] = min(max(1.0 - abs(inner) ** 2, 0.0), 1.0)
    else:
        raise ValueError(f"unknown quantizer mode {mode!r}")
    out[active] = mags[active, None] * c
    Z[active] = Za
    return out, Z


def quantize_csi_set(channels, bits, mode: str, rng: np.random.Generator) -> QuantizedCSI:
    """Quantize every ``h[q, m]`` direction with its own codebook.

    ``channels`` is a :class:`~cranzf.channel.ChannelSet` or an array of
    shape (Q, M, N). Blocks are visited in (q, m) order.
    """
    if bits < 1:
        raise ValueError("bits_per_vector must be >= 1")
    h = getattr(channels, "h", channels)
    h = np.asarray(h, dtype=complex)
    Q, M, N = h.shape
    est, Z = quantize_block(h.reshape(Q * M, N), bits, mode, rng)
    mags = np.linalg.norm(h, axis=2)
    dirs = np.zeros_like(h)
    nz = mags > _ZERO_TOL
    dirs[nz] = est.reshape(Q, M, N)[nz] / mags[nz][:, None]
    return QuantizedCSI(mags, dirs, Z.reshape(Q, M))
