"""SINR, the perfect-CSI rate closed form and the Monte Carlo rate engine.

Every trial owns two random streams derived from ``(seed, key, trial,
attempt)``: one for the channel draw and one for all quantization in that
trial. Channels are always drawn with the cluster's full antenna count and
truncated when a scheme turns antennas off, so schemes evaluated with the
same seed and key see the same channels. Results therefore do not depend on
how trials are split across workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import kernels
from .channel import ClusterConfig, draw_channel_array
from .numerics import scaled_expint
from .precoding import (
    front_end_batch,
    lift_batch,
    paq_precoders_batch,
    power_backoff_batch,
    serving_stats,
    zf_precoders_batch,
)
from .rvq import _complex_normal, _surrogate_apply, quantize_block, surrogate_error

__all__ = [
    "RateEstimate",
    "McResult",
    "sinr",
    "sinr_all",
    "perfect_csi_rate_phi",
    "bits_per_vector",
    "trial_rngs",
    "simulate_trials",
    "ergodic_rate_mc",
]

_LOG2E = 1.0 / math.log(2.0)
_TAG_CHANNEL = 0
_TAG_QUANT = 1
_MAX_ATTEMPTS = 20


@dataclass(frozen=True)
class RateEstimate:
    """Sample mean and standard error of a rate in bits/s/Hz."""

    mean: float
    std_error: float
    trials: int

    @classmethod
    def from_samples(cls, x) -> "RateEstimate":
        x = np.asarray(x, dtype=float)
        n = x.size
        se = float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        return cls(float(np.mean(x)), se, n)


def sinr(q: int, channels, precoders, power: float, noise: float) -> float:
    """SINR of MS ``q`` under single-user detection.

    ``channels`` and ``precoders`` are per-block arrays (or objects exposing
    ``h`` / ``blocks``) of equal shape (Q, M, N).
    """
    H = _stack(channels)
    P = _stack(precoders)
    g = np.abs(H[:, q].conj() @ P) ** 2
    interference = g.sum() - g[q]
    return float(power * g[q] / (noise + power * interference))


def sinr_all(channels, precoders, power: float, noise: float) -> np.ndarray:
    H = _stack(channels)[None]
    P = _stack(precoders)[None]
    return kernels.sinr_batch(H, P, np.array([float(power)]), noise)[0]


def _stack(x) -> np.ndarray:
    x = getattr(x, "h", getattr(x, "blocks", x))
    x = np.asarray(x, dtype=complex)
    return x.reshape(x.shape[0], -1).T


@lru_cache(maxsize=4096)
def perfect_csi_rate_phi(T: int, rho: float) -> float:
    """Ergodic rate of a perfectly zero-forced link with ``T`` degrees of freedom.

    ``log2(e) * exp(1/rho) * sum_{k<T} Gamma(-k, 1/rho) rho^{-k}``, i.e. the
    mean of ``log2(1 + rho X)`` with ``X ~ Gamma(T, 1)``. Each summand equals
    ``exp(x) E_{k+1}(x)`` with ``x = 1/rho``, which is evaluated directly so
    that no term overflows.
    """
    T = int(T)
    if T < 1:
        raise ValueError("T must be >= 1")
    if not rho > 0:
        raise ValueError("rho must be positive")
    x = 1.0 / rho
    return _LOG2E * math.fsum(scaled_expint(k + 1, x) for k in range(T))


def bits_per_vector(B, n_vectors: int):
    """Per-vector bit budget ``floor(B / n_vectors)``; infinite stays infinite."""
    if B == math.inf:
        return math.inf
    return int(B) // int(n_vectors)


# ---------------------------------------------------------------------------
# Monte Carlo engine
# ---------------------------------------------------------------------------
def trial_rngs(seed: int, key, trial: int, attempt: int = 0):
    """Channel and quantization generators of one trial."""
    base = tuple(int(k) for k in key) + (int(trial), int(attempt))
    ch = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=base + (_TAG_CHANNEL,)))
    qz = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=base + (_TAG_QUANT,)))
    return ch, qz


def _quantize_rows(x, active, b, mode, rngs):
    """Quantize ``x[t, r]`` for active rows ``r`` with each trial's generator.

    Draw order per trial matches :func:`cranzf.rvq.quantize_block`.
    """
    n, R, N = x.shape
    if b == math.inf or N == 1 or not active.any():
        return x
    rows = np.flatnonzero(active)
    out = np.zeros_like(x)
    if mode == "explicit":
        for t in range(n):
            est, _ = quantize_block(x[t, rows], b, mode, rngs[t])
            out[t, rows] = est
        return out
    if mode != "surrogate":
        raise ValueError(f"unknown quantizer mode {mode!r}")
    u = np.empty((n, rows.size))
    w = np.empty((n, rows.size, N), dtype=complex)
    for t in range(n):
        u[t] = rngs[t].random(rows.size)
        w[t] = _complex_normal(rngs[t], (rows.size, N))
    v = x[:, rows]
    mags = np.linalg.norm(v, axis=2)
    c, _ = _surrogate_apply(v / mags[..., None], surrogate_error(u, b, N), w)
    out[:, rows] = mags[..., None] * c
    return out


def _rates_for(h, cfg, scheme, Nt, discard, B, quantizer, power, rngs):
    """Per-trial per-MS rates for channels ``h`` (n, Q, M, Nt_full)."""
    n, Q, M, _ = h.shape
    h = np.ascontiguousarray(h[..., :Nt])
    qbar = len(discard[0]) if discard else 0
    Q_eff = Q - qbar
    if scheme == "perfect":
        p, ok = zf_precoders_batch(h)
    elif qbar == 0:
        b = bits_per_vector(B, Q)
        active = np.ones(Q * M, dtype=bool)
        hh = _quantize_rows(h.reshape(n, Q * M, Nt), active, b, quantizer, rngs)
        p, ok = zf_precoders_batch(hh.reshape(h.shape))
        p = _quantize_rows(p.reshape(n, Q * M, Nt), active, b, quantizer, rngs).reshape(h.shape)
    else:
        stats = serving_stats(discard, Q)
        b = bits_per_vector(B, Q_eff)
        A = front_end_batch(h, discard)
        ht = np.einsum("nmij,nqmi->nqmj", A.conj(), h)
        ht[:, ~stats.v] = 0.0
        Ne = Nt - qbar
        active = stats.v.reshape(-1)
        hh = _quantize_rows(ht.reshape(n, Q * M, Ne), active, b, quantizer, rngs)
        pt, ok = paq_precoders_batch(hh.reshape(ht.shape), stats)
        pt = _quantize_rows(pt.reshape(n, Q * M, Ne), active, b, quantizer, rngs)
        p = lift_batch(A, pt.reshape(ht.shape))
    if power == "fixed":
        pw = np.full(n, cfg.P_max / Q_eff)
    elif power == "backoff":
        with np.errstate(divide="ignore", invalid="ignore"):
            pw = power_backoff_batch(p, Q_eff) * cfg.P_max / Q_eff
        pw[~ok] = 0.0
    else:
        raise ValueError(f"unknown power mode {power!r}")
    H = h.reshape(n, Q, M * Nt).transpose(0, 2, 1)
    P = p.reshape(n, Q, M * Nt).transpose(0, 2, 1)
    s = kernels.sinr_batch(H, P, pw, cfg.noise_power)
    return np.log2(1.0 + s), ok, pw


def _check_scheme(cfg, scheme, Nt, discard):
    if scheme not in ("standard", "paq", "perfect"):
        raise ValueError(f"unknown scheme {scheme!r}")
    if not 1 <= Nt <= cfg.Nt:
        raise ValueError(f"Nt={Nt} outside [1, {cfg.Nt}]")
    if cfg.M * Nt < cfg.Q:
        raise ValueError(f"M*Nt = {cfg.M * Nt} < Q = {cfg.Q}")
    if scheme == "paq":
        if discard is None or len(discard) != cfg.M:
            raise ValueError("paq needs one discard set per S-RRH")
        qbar = len(discard[0])
        if qbar >= Nt:
            raise ValueError(f"qbar={qbar} >= Nt={Nt}")
        st = serving_stats(discard, cfg.Q)
        if np.any(st.M_q == 0):
            raise ValueError("some MS is not served by any S-RRH")
        if np.any(st.T_tilde(Nt - qbar) < 1):
            raise ValueError("masked zero-forcing infeasible: too few effective dimensions")
        return tuple(tuple(d) for d in discard)
    return None


def simulate_trials(cfg: ClusterConfig, scheme: str, B, trials, seed: int, *,
                    Nt: int | None = None, discard=None, quantizer: str = "surrogate",
                    power: str = "fixed", key=()):
    """Per-trial per-MS rates, shape (len(trials), Q).

    Parameters
    ----------
    trials : int or sequence of int
        Trial indices (an int ``n`` means ``range(n)``).
    key : tuple of int
        Extra stream key, e.g. a placement index.

    Returns
    -------
    rates : ndarray (n, Q)
    resampled : int
        Number of degenerate draws that were replaced.
    power : ndarray (n,)
        Per-MS transmit power used in each trial.
    """
    Nt = cfg.Nt if Nt is None else int(Nt)
    discard = _check_scheme(cfg, scheme, Nt, discard)
    idx = np.arange(trials) if np.isscalar(trials) else np.asarray(trials, dtype=int)
    n = idx.size
    attempt = np.zeros(n, dtype=int)
    rates = np.empty((n, cfg.Q))
    pw = np.empty(n)
    todo = np.arange(n)
    resampled = 0
    while todo.size:
        pairs = [trial_rngs(seed, key, idx[i], attempt[i]) for i in todo]
        h = np.stack([draw_channel_array(ch, cfg.alpha, cfg.Nt) for ch, _ in pairs])
        r, ok, p = _rates_for(h, cfg, scheme, Nt, discard, B, quantizer, power,
                              [qz for _, qz in pairs])
        rates[todo[ok]] = r[ok]
        pw[todo[ok]] = p[ok]
        todo = todo[~ok]
        attempt[todo] += 1
        resampled += todo.size
        if attempt.max(initial=0) > _MAX_ATTEMPTS:
            raise RuntimeError("too many degenerate channel draws; check the configuration")
    return rates, resampled, pw


@dataclass
class McResult:
    """Outcome of :func:`ergodic_rate_mc`."""

    per_ms: list
    throughput: RateEstimate
    resampled: int
    mean_power: float
    samples: np.ndarray = field(repr=False)


def _chunk_worker(args):
    cfg, scheme, B, idx, seed, kw = args
    return simulate_trials(cfg, scheme, B, idx, seed, **kw)


def ergodic_rate_mc(scheme: str, cfg: ClusterConfig, B, trials: int, seed: int, *,
                    Nt: int | None = None, discard=None, quantizer: str = "surrogate",
                    power: str = "fixed", key=(), workers: int = 1) -> McResult:
    """Monte Carlo ergodic rates.

    Each trial draws channels, quantizes the CSI forward, builds the
    beamformers, quantizes them back and evaluates every MS's SINR.

    Parameters
    ----------
    scheme : {"standard", "paq", "perfect"}
    cfg : ClusterConfig
        ``cfg.Nt`` is the physical antenna count.
    B : int or float
        Bits per S-RRH; ``math.inf`` disables quantization.
    trials : int
    seed : int
    Nt : int, optional
        Active antennas per S-RRH (default: all).
    discard : sequence of sequences, optional
        PaQ discard sets per S-RRH (required for ``scheme="paq"``).
    quantizer : {"surrogate", "explicit"}
    power : {"fixed", "backoff"}
        ``fixed`` uses ``P_max / Q_eff`` per MS; ``backoff`` scales it by the
        equal power-backoff factor of each draw.
    workers : int
        Processes used to split the trials. Results are identical for any
        value.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    kw = dict(Nt=Nt, discard=discard, quantizer=quantizer, power=power, key=tuple(key))
    if workers > 1 and trials > 1:
        chunks = np.array_split(np.arange(trials), min(workers, trials))
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_chunk_worker, [(cfg, scheme, B, c, seed, kw) for c in chunks]))
        rates = np.concatenate([p[0] for p in parts])
        resampled = sum(p[1] for p in parts)
        pw = np.concatenate([p[2] for p in parts])
    else:
        rates, resampled, pw = simulate_trials(cfg, scheme, B, trials, seed, **kw)
    per_ms = [RateEstimate.from_samples(rates[:, q]) for q in range(cfg.Q)]
    return McResult(per_ms, RateEstimate.from_samples(rates.mean(axis=1)), resampled,
                    float(pw.mean()), rates)
