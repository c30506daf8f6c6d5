"""Joint zero-forcing precoders for the full-CSI and precode-and-quantize
(PaQ) feedback schemes, and the equal power-backoff rule.

Single-instance functions take per-block arrays of shape ``(Q, M, N)`` (MS,
S-RRH, antenna) and are the reference implementations. The ``*_batch``
variants carry a leading trial axis and call the compiled kernels; they are
what the Monte Carlo engine uses.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .numerics import orthonormal_null_basis

__all__ = [
    "DegenerateChannelError",
    "PrecoderSet",
    "ServingStats",
    "PaqPlan",
    "ZF_DEGENERATE_RTOL",
    "zf_precoders",
    "paq_allocate",
    "symmetric_policy",
    "reallocate_unserved",
    "serving_stats",
    "front_end_matrix",
    "build_paq_plan",
    "effective_channels",
    "paq_precoders",
    "lift_beamformer",
    "power_backoff",
    "zf_precoders_batch",
    "front_end_batch",
    "paq_precoders_batch",
    "lift_batch",
    "power_backoff_batch",
]

#: A user whose channel keeps less than this fraction of its norm after
#: projection onto the interferers' null space makes the instance degenerate.
ZF_DEGENERATE_RTOL = 1e-12


class DegenerateChannelError(ValueError):
    """The requested zero-forcing solution does not exist for this draw."""


def _blocks(x) -> np.ndarray:
    for attr in ("h_hat", "h", "blocks"):
        if hasattr(x, attr):
            x = getattr(x, attr)
            break
    x = np.asarray(x, dtype=complex)
    if x.ndim != 3:
        raise ValueError(f"expected per-block array of shape (Q, M, N), got {x.shape}")
    return x


@dataclass
class PrecoderSet:
    """Per-block beamformers ``blocks[q, m] = p_{q,m}``, shape (Q, M, N)."""

    blocks: np.ndarray

    @property
    def Q(self):
        return self.blocks.shape[0]

    def stacked(self, q: int) -> np.ndarray:
        return self.blocks[q].reshape(-1)

    def stacked_matrix(self) -> np.ndarray:
        """Beamformers as the columns of an ``(M*N, Q)`` matrix."""
        return self.blocks.reshape(self.Q, -1).T

    def block_power(self) -> np.ndarray:
        """``||p_{q,m}||^2``, shape (Q, M)."""
        return np.sum(np.abs(self.blocks) ** 2, axis=2)


# ---------------------------------------------------------------------------
# Standard scheme
# ---------------------------------------------------------------------------
def _zf_column(h_q: np.ndarray, interferers: np.ndarray) -> np.ndarray:
    dim = h_q.shape[0]
    if interferers.shape[1]:
        try:
            N = orthonormal_null_basis(interferers, dim)
        except ValueError as exc:
            raise DegenerateChannelError(str(exc)) from None
    else:
        N = np.eye(dim, dtype=complex)
    g = N.conj().T @ h_q  # (h^H N)^H
    ng = np.linalg.norm(g)
    if not ng > ZF_DEGENERATE_RTOL * np.linalg.norm(h_q):
        raise DegenerateChannelError("channel lies in the span of the interferers")
    return N @ g / ng


def zf_precoders(csi) -> PrecoderSet:
    """Zero-forcing beamformers from (estimated) CSI.

    Each ``p_q`` is the normalized projection of ``h_q`` onto the null space
    of the other users' stacked channels.

    Parameters
    ----------
    csi : QuantizedCSI, ChannelSet or ndarray of shape (Q, M, N)

    Raises
    ------
    DegenerateChannelError
        If ``M*N < Q`` or some channel has no component outside the span of
        the others.
    """
    h = _blocks(csi)
    Q, M, N = h.shape
    if M * N < Q:
        raise DegenerateChannelError(f"M*N = {M * N} < Q = {Q}: null space is empty")
    H = h.reshape(Q, -1).T
    out = np.empty_like(h)
    for q in range(Q):
        others = np.delete(H, q, axis=1)
        out[q] = _zf_column(H[:, q], others).reshape(M, N)
    return PrecoderSet(out)


# ---------------------------------------------------------------------------
# PaQ allocation
# ---------------------------------------------------------------------------
def paq_allocate(alpha: np.ndarray, qbar: int, Nt: int | None = None):
    """Discard, at every S-RRH, the ``qbar`` MSs with the weakest links.

    Parameters
    ----------
    alpha : ndarray, shape (M, Q)
    qbar : int
    Nt : int, optional
        When given, also enforces ``qbar <= Nt - 1``.

    Returns
    -------
    tuple of tuple of int
        ``discard[m]``, sorted. Ties are broken toward the lower MS index.
    """
    alpha = np.asarray(alpha, dtype=float)
    M, Q = alpha.shape
    hi = Q - 1 if Nt is None else min(Q - 1, Nt - 1)
    if not 0 <= qbar <= hi:
        raise ValueError(f"qbar must lie in [0, {hi}], got {qbar}")
    out = []
    for m in range(M):
        order = np.argsort(alpha[m], kind="stable")
        out.append(tuple(sorted(int(q) for q in order[:qbar])))
    return tuple(out)


def symmetric_policy(M: int, Q: int, qbar: int):
    """Rotating discard sets for equal-attenuation clusters.

    MSs are split into ``M`` consecutive groups of ``Q/M``; S-RRH ``m``
    discards the ``qbar*M/Q`` groups that follow its own, cyclically.
    """
    if Q % M:
        raise ValueError(f"Q/M must be an integer (Q={Q}, M={M})")
    if (qbar * M) % Q:
        raise ValueError(f"qbar*M/Q must be an integer (qbar={qbar}, M={M}, Q={Q})")
    if not 0 <= qbar < Q:
        raise ValueError(f"qbar must lie in [0, {Q - 1}], got {qbar}")
    L = Q // M
    k = qbar * M // Q
    out = []
    for m in range(M):
        groups = [(i + m) % M for i in range(1, k + 1)]
        out.append(tuple(sorted(q for g in groups for q in range(g * L, (g + 1) * L))))
    return tuple(out)


def reallocate_unserved(alpha: np.ndarray, discard):
    """Give every MS at least one serving S-RRH.

    An MS discarded everywhere is taken in by its strongest S-RRH, which in
    exchange discards the MS it serves that has the most serving S-RRHs
    (ties: weakest link to that S-RRH, then lowest index). The evicted MS
    keeps at least one server, so the loop terminates. If the strongest
    S-RRH has no such MS, the next strongest is tried.
    """
    alpha = np.asarray(alpha, dtype=float)
    M, Q = alpha.shape
    sets = [set(d) for d in discard]

    def n_serving(j):
        return sum(j not in s for s in sets)

    for q in range(Q):
        if n_serving(q):
            continue
        for m in np.argsort(-alpha[:, q], kind="stable"):
            cand = [j for j in range(Q) if j not in sets[m] and n_serving(j) >= 2]
            if not cand:
                continue
            j = min(cand, key=lambda j: (-n_serving(j), alpha[m, j], j))
            sets[m].discard(q)
            sets[m].add(j)
            break
        else:
            raise ValueError(f"cannot reallocate MS {q}: no S-RRH can release a slot")
    return tuple(tuple(sorted(s)) for s in sets)


@dataclass(frozen=True)
class ServingStats:
    """Serving-set bookkeeping for a PaQ allocation.

    ``v[q, m]`` is true when S-RRH ``m`` serves MS ``q``; ``M_q`` counts the
    serving S-RRHs, ``M_qj[q, j]`` the S-RRHs serving both, and ``Q_tilde``
    the MSs (including ``q``) sharing at least one S-RRH with ``q``.
    """

    v: np.ndarray
    M_q: np.ndarray
    M_qj: np.ndarray
    Q_tilde: np.ndarray

    @property
    def full(self) -> bool:
        return bool(self.v.all())

    def T_tilde(self, Nt_eff: int) -> np.ndarray:
        """Per-MS effective diversity order ``M_q*Nt_eff - (Q_tilde_q - 1)``."""
        return self.M_q * Nt_eff - (self.Q_tilde - 1)

    def coupled(self, q: int) -> np.ndarray:
        """Indices ``j != q`` sharing an S-RRH with ``q``."""
        row = self.M_qj[q] > 0
        row[q] = False
        return np.flatnonzero(row)


def serving_stats(discard, Q: int) -> ServingStats:
    M = len(discard)
    v = np.ones((Q, M), dtype=bool)
    for m, d in enumerate(discard):
        for q in d:
            if not 0 <= q < Q:
                raise ValueError(f"MS index {q} out of range")
            v[q, m] = False
    vi = v.astype(int)
    M_q = vi.sum(axis=1)
    M_qj = vi @ vi.T
    off = M_qj.copy()
    np.fill_diagonal(off, 1)
    Q_tilde = Q - np.sum(off == 0, axis=1)
    for a in (v, M_q, M_qj, Q_tilde):
        a.setflags(write=False)
    return ServingStats(v, M_q, M_qj, Q_tilde)


# ---------------------------------------------------------------------------
# PaQ front end
# ---------------------------------------------------------------------------
def front_end_matrix(local_channels, Nt: int) -> np.ndarray:
    """Orthonormal basis of the complement of the discarded local channels.

    Returns an ``Nt x (Nt - k)`` matrix for ``k`` discarded channels (the
    identity when none are discarded).
    """
    local_channels = list(local_channels)
    if not local_channels:
        return np.eye(Nt, dtype=complex)
    A = orthonormal_null_basis(local_channels, Nt)
    if A.shape[1] != Nt - len(local_channels):
        raise DegenerateChannelError("discarded channels are linearly dependent")
    return A


@dataclass
class PaqPlan:
    """PaQ allocation plus the front-end matrices of one channel draw.

    ``A`` has shape ``(M, Nt, Nt - qbar)``.
    """

    qbar: int
    discard: tuple
    stats: ServingStats
    A: np.ndarray

    @property
    def M(self):
        return len(self.discard)

    @property
    def Nt(self):
        return self.A.shape[1]

    @property
    def Nt_eff(self):
        return self.A.shape[2]

    @property
    def serve(self):
        Q = self.stats.v.shape[0]
        return tuple(tuple(q for q in range(Q) if q not in d) for d in self.discard)


def build_paq_plan(channels, discard) -> PaqPlan:
    h = _blocks(channels)
    Q, M, Nt = h.shape
    sizes = {len(d) for d in discard}
    if len(discard) != M or len(sizes) != 1:
        raise ValueError("need one discard set per S-RRH, all of the same size")
    qbar = sizes.pop()
    if qbar >= Nt:
        raise ValueError(f"qbar={qbar} leaves no effective antennas (Nt={Nt})")
    A = np.stack([front_end_matrix([h[q, m] for q in discard[m]], Nt) for m in range(M)])
    return PaqPlan(qbar, tuple(tuple(d) for d in discard), serving_stats(discard, Q), A)


def effective_channels(channels, plan: PaqPlan) -> np.ndarray:
    """``A_m^H h_{q,m}`` for served pairs, exact zeros for discarded ones."""
    h = _blocks(channels)
    ht = np.einsum("mij,qmi->qmj", plan.A.conj(), h)
    ht[~plan.stats.v] = 0.0
    return ht


def paq_precoders(effective_csi, plan: PaqPlan) -> PrecoderSet:
    """Masked zero-forcing in the effective space.

    ``p_q`` lives on the blocks of the S-RRHs serving ``q`` and nulls the
    other users' estimates restricted to those blocks.
    """
    ht = _blocks(effective_csi)
    Q, M, N = ht.shape
    st = plan.stats
    out = np.zeros_like(ht)
    for q in range(Q):
        ms = np.flatnonzero(st.v[q])
        js = st.coupled(q)
        dim = ms.size * N
        if dim < js.size + 1:
            raise DegenerateChannelError(
                f"MS {q}: {dim} effective dimensions for {js.size + 1} coupled users")
        hq = ht[q, ms].reshape(-1)
        others = ht[js][:, ms].reshape(js.size, dim).T
        out[q, ms] = _zf_column(hq, others).reshape(ms.size, N)
    return PrecoderSet(out)


def lift_beamformer(pset, plan: PaqPlan) -> PrecoderSet:
    """Map effective-space beamformers back to the antennas: ``A_m p_{q,m}``."""
    p = _blocks(pset)
    return PrecoderSet(np.einsum("mij,qmj->qmi", plan.A, p))


def power_backoff(pset, Q_eff: int) -> float:
    """Largest common scaling ``gamma`` keeping every S-RRH within budget.

    With per-MS power ``gamma * P_max / Q_eff`` the busiest S-RRH transmits
    exactly ``P_max``. S-RRHs with no load do not constrain ``gamma``.
    """
    load = np.sum(np.abs(_blocks(pset)) ** 2, axis=(0, 2))
    if not np.any(load > 0):
        raise ValueError("no S-RRH transmits anything")
    return float(Q_eff / load.max())


# ---------------------------------------------------------------------------
# Batched variants (leading trial axis)
# ---------------------------------------------------------------------------
def zf_precoders_batch(h: np.ndarray):
    """Batched :func:`zf_precoders`: ``h`` (n, Q, M, N) -> (p, ok)."""
    n, Q, M, N = h.shape
    H = np.ascontiguousarray(h.reshape(n, Q, M * N).transpose(0, 2, 1))
    P, ok = kernels.zf_batch(H, ZF_DEGENERATE_RTOL)
    return P.transpose(0, 2, 1).reshape(n, Q, M, N), ok


def front_end_batch(h: np.ndarray, discard) -> np.ndarray:
    """Front-end matrices for a batch of draws, shape (n, M, Nt, Nt - qbar).

    Uses the same construction as :func:`front_end_matrix` (complement of the
    discarded channels, completed from coordinate vectors in index order).
    """
    n, Q, M, Nt = h.shape
    k = len(discard[0])
    out = np.empty((n, M, Nt, Nt - k), dtype=complex)
    eye = np.eye(Nt, dtype=complex)
    for m in range(M):
        if k == 0:
            out[:, m] = eye
            continue
        X = h[:, list(discard[m]), m, :].transpose(0, 2, 1)  # (n, Nt, k)
        U, _ = np.linalg.qr(X)
        basis = np.zeros((n, Nt, Nt), dtype=complex)
        basis[:, :, :k] = U
        count = np.full(n, k)
        rows = np.arange(n)
        for i in range(Nt):
            w = np.broadcast_to(eye[:, i], (n, Nt)).copy()
            for _ in range(2):
                coef = np.einsum("nij,ni->nj", basis.conj(), w)
                w -= np.einsum("nij,nj->ni", basis, coef)
            nw = np.linalg.norm(w, axis=1)
            keep = (nw > 1e-6) & (count < Nt)
            idx = rows[keep]
            basis[idx, :, count[keep]] = w[keep] / nw[keep, None]
            count[keep] += 1
        out[:, m] = basis[:, :, k:]
    return out


def paq_precoders_batch(ht: np.ndarray, stats: ServingStats):
    """Batched :func:`paq_precoders`: ``ht`` (n, Q, M, Ñ) -> (p, ok)."""
    if stats.full:
        return zf_precoders_batch(ht)
    n, Q, M, N = ht.shape
    out = np.zeros_like(ht)
    ok = np.ones(n, dtype=bool)
    for q in range(Q):
        ms = np.flatnonzero(stats.v[q])
        cols = np.concatenate(([q], stats.coupled(q)))
        if ms.size * N < cols.size:
            raise DegenerateChannelError(
                f"MS {q}: {ms.size * N} effective dimensions for {cols.size} coupled users")
        sub = ht[:, cols][:, :, ms].reshape(n, cols.size, ms.size * N)
        P, okq = kernels.zf_batch(np.ascontiguousarray(sub.transpose(0, 2, 1)),
                                  ZF_DEGENERATE_RTOL)
        out[:, q, ms] = P[:, :, 0].reshape(n, ms.size, N)
        ok &= okq
    return out, ok


def lift_batch(A: np.ndarray, p: np.ndarray) -> np.ndarray:
    """``A`` (n, M, Nt, Ñ), ``p`` (n, Q, M, Ñ) -> (n, Q, M, Nt)."""
    return np.einsum("nmij,nqmj->nqmi", A, p)


def power_backoff_batch(p: np.ndarray, Q_eff: int) -> np.ndarray:
    """Per-trial backoff factors for ``p`` of shape (n, Q, M, N)."""
    load = np.sum(np.abs(p) ** 2, axis=(1, 3))
    return Q_eff / load.max(axis=1)
