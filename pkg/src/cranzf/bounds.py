"""Closed-form rate-loss bounds for joint zero-forcing with RVQ feedback.

Quantities of the form ``x = 2**(B/K)`` are passed around as ``log2 x`` so
that large bit budgets (``B`` in the hundreds, ``K`` as small as 2) never
overflow. All rates are in bits/s/Hz.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .numerics import confluent_hypergeometric_U, log_beta
from .precoding import ServingStats, serving_stats, symmetric_policy
from .rates import perfect_csi_rate_phi

__all__ = [
    "BoundParams",
    "BoundReport",
    "calU",
    "calU_log2",
    "calV",
    "calV_log2",
    "asymptotic_V",
    "theorem1_bound",
    "corollary1_approx",
    "theorem2_bound",
    "corollary2_bound",
    "corollary3_approx",
    "lower_bound_report",
    "symmetric_stats",
]

_LN2 = math.log(2.0)
_SQRT2 = math.sqrt(2.0)
# beyond this log2(x) the O(1/x) corrections to U(x, a) are below 2^-1000
_LOG2_ASYMPTOTIC = 1000.0


@dataclass(frozen=True)
class BoundParams:
    """One parameter point.

    ``B`` is the total feedback budget per S-RRH in bits (may be
    non-integer or ``inf``); ``P_max`` is linear; ``qbar = 0`` is the
    standard scheme.
    """

    M: int
    Q: int
    Nt: int
    B: float
    P_max: float
    qbar: int = 0

    def __post_init__(self):
        if self.M < 1 or self.Q < 1:
            raise ValueError("M and Q must be >= 1")
        if self.Nt < 2:
            raise ValueError("Nt must be >= 2")
        if not 0 <= self.qbar < self.Q:
            raise ValueError(f"qbar must lie in [0, {self.Q - 1}]")
        if self.Nt_eff < 2:
            raise ValueError(f"Nt - qbar = {self.Nt_eff} < 2")
        if not self.P_max > 0:
            raise ValueError("P_max must be positive")
        if not self.B >= self.Q - self.qbar:
            raise ValueError("need at least one bit per quantized vector")

    @property
    def Nt_eff(self) -> int:
        return self.Nt - self.qbar

    @property
    def n_vectors(self) -> int:
        """Vectors quantized per S-RRH per direction."""
        return self.Q - self.qbar

    @property
    def a(self) -> float:
        return 1.0 / (self.Nt_eff - 1)

    @property
    def P(self) -> float:
        """Per-MS power of the scheme (``P_max / (Q - qbar)``)."""
        return self.P_max / self.n_vectors

    @property
    def log2_x(self) -> float:
        return self.B / self.n_vectors

    @property
    def T(self) -> int:
        """Diversity order of full-cluster ZF, ``M*Nt - (Q - 1)``."""
        return self.M * self.Nt - self.Q + 1

    def standard(self) -> "BoundParams":
        return BoundParams(self.M, self.Q, self.Nt, self.B, self.P_max, 0)


@dataclass(frozen=True)
class BoundReport:
    """Rate-loss terms and the resulting lower bound for one MS.

    ``lower_bound`` is clamped at zero; ``lower_bound_raw`` is not.
    ``phi`` is the perfect-CSI rate of the scheme itself (``R_star`` minus
    the array-gain loss).
    """

    deltaR1: float
    deltaR2: float
    deltaR_AG: float
    R_star: float
    lower_bound_raw: float

    @property
    def lower_bound(self) -> float:
        return max(0.0, self.lower_bound_raw)

    @property
    def phi(self) -> float:
        return self.R_star - self.deltaR_AG

    @property
    def quantization_loss(self) -> float:
        return self.deltaR1 + self.deltaR2


# ---------------------------------------------------------------------------
# Building blocks
# ---------------------------------------------------------------------------
def calU_log2(log2_x: float, a: float) -> float:
    """``x * beta(x, 1 + a)`` with ``x = 2**log2_x``."""
    if not log2_x >= 0:
        raise ValueError("x must be >= 1")
    if not a > 0:
        raise ValueError("a must be positive")
    if log2_x == math.inf:
        return 0.0
    if log2_x > _LOG2_ASYMPTOTIC:
        return math.exp(math.lgamma(1.0 + a) - a * log2_x * _LN2)
    x = 2.0 ** log2_x
    return math.exp(log2_x * _LN2 + log_beta(x, 1.0 + a))


def calU(x: float, a: float) -> float:
    """``x * beta(x, 1 + a)``; the mean of ``Z**(a*(N-1))`` for RVQ error ``Z``
    with ``x = 2**b`` codewords in dimension ``N``."""
    if not x >= 1:
        raise ValueError("x must be >= 1")
    return calU_log2(math.log2(x), a)


def calV_log2(M_sub: int, log2_x: float, a: float) -> float:
    """Dispersion term ``(M-1)/sqrt(2M-1) * sqrt(U(x,2a) - U(x,a)**2)``."""
    if M_sub < 1:
        raise ValueError("M_sub must be >= 1")
    var = calU_log2(log2_x, 2.0 * a) - calU_log2(log2_x, a) ** 2
    if var < 0:
        if var < -1e-12:
            raise ValueError(f"negative variance {var:.3e} in calV")
        var = 0.0
    return (M_sub - 1) / math.sqrt(2 * M_sub - 1) * math.sqrt(var)


def calV(M_sub: int, x: float, a: float) -> float:
    return calV_log2(M_sub, math.log2(x), a)


def asymptotic_V(M_sub: int, a: float) -> float:
    """Large-``x`` constant of ``calV * x**a``:
    ``sqrt(Gamma(2a+1) - Gamma(a+1)**2) (M-1)/sqrt(2M-1)``."""
    var = math.gamma(2 * a + 1) - math.gamma(a + 1) ** 2
    return math.sqrt(max(var, 0.0)) * (M_sub - 1) / math.sqrt(2 * M_sub - 1)


@lru_cache(maxsize=4096)
def _hyperu_half(b: float, z: float) -> float:
    return confluent_hypergeometric_U(0.5, b, z)


def _gain_term(P: float, Nt: int, M_sub: int) -> float:
    """``pi sqrt(P) Nt M / sqrt(2) * U(1/2, (1 - Nt M)/2, 1/(2P))``."""
    return (math.pi * math.sqrt(P) * Nt * M_sub / _SQRT2
            * _hyperu_half(0.5 * (1 - Nt * M_sub), 0.5 / P))


def _interference_bracket(log2_x: float, a: float) -> float:
    u1 = calU_log2(log2_x, a)
    u2 = calU_log2(log2_x, 2.0 * a)
    e = 2.0 ** (-a * log2_x)
    return a * e * (2.0 * (1.0 - u1) + e) + (1.0 - u1) ** 2 - (1.0 - u1 / 2.0 - u2) ** 4


def _loss_terms(P, Nt_eff, a, log2_x, coupling, M_sub, R_star, M_gain):
    dR1 = math.log2(1.0 + P * coupling * _interference_bracket(log2_x, a))
    dR2 = (6.0 * R_star * (calU_log2(log2_x, a) + calV_log2(M_sub, log2_x, a))
           + _gain_term(P, Nt_eff, M_gain)
           * (calU_log2(log2_x, a / 2) + calV_log2(M_sub, log2_x, a / 2)))
    return dR1, dR2


# ---------------------------------------------------------------------------
# Standard scheme
# ---------------------------------------------------------------------------
def theorem1_bound(params: BoundParams):
    """Rate-loss terms ``(dR1, dR2)`` of full-cluster ZF with ``B/Q`` bits per
    vector under equal attenuation summing to one per MS.

    ``dR1`` bounds the residual-interference loss and ``dR2`` the loss of
    beamforming gain; both vanish as ``B`` grows.
    """
    p = params.standard()
    if p.T < 1:
        raise ValueError(f"M*Nt = {p.M * p.Nt} < Q = {p.Q}")
    R_star = perfect_csi_rate_phi(p.T, p.P / p.M)
    return _loss_terms(p.P, p.Nt, p.a, p.log2_x, p.Nt * (p.Q - 1) / p.M, p.M,
                       R_star, p.M)


def _leading_term(P, Nt_eff, a, log2_x, M_gain, M_V):
    ap = 0.5 * a
    return (2.0 ** (-ap * log2_x) * _gain_term(P, Nt_eff, M_gain)
            * (asymptotic_V(M_V, ap) + math.gamma(ap + 1.0)))


def corollary1_approx(params: BoundParams) -> float:
    """Leading large-``B`` term of ``dR1 + dR2`` for the standard scheme;
    decays as ``2**(-B / (2 Q (Nt - 1)))``."""
    p = params.standard()
    return _leading_term(p.P, p.Nt, p.a, p.log2_x, p.M, p.M)


# ---------------------------------------------------------------------------
# PaQ scheme
# ---------------------------------------------------------------------------
def theorem2_bound(params: BoundParams, stats: ServingStats):
    """Per-MS PaQ rate-loss terms for an arbitrary allocation.

    Returns
    -------
    dR1, dR2, dAG : ndarray, shape (Q,)
        Residual interference, beamforming-gain loss and the array-gain loss
        caused by the reduced effective dimension (independent of ``B``).
    """
    p = params
    Q, M, Ne = p.Q, p.M, p.Nt_eff
    if stats.v.shape != (Q, M):
        raise ValueError("serving stats do not match (Q, M)")
    if np.any(stats.M_q == 0):
        raise ValueError("some MS is not served")
    T_tilde = stats.T_tilde(Ne)
    if np.any(T_tilde < 1):
        raise ValueError(f"effective diversity order below one: {T_tilde.tolist()}")
    R_star = perfect_csi_rate_phi(p.T, p.P_max / Q / M)
    dR1 = np.empty(Q)
    dR2 = np.empty(Q)
    dAG = np.empty(Q)
    for q in range(Q):
        j = np.arange(Q) != q
        coupling = math.fsum(Ne * stats.M_qj[q, j] / (stats.M_q[j] * M))
        Mq = int(stats.M_q[q])
        phi_q = perfect_csi_rate_phi(int(T_tilde[q]), p.P / M)
        dR1[q], dR2[q] = _loss_terms(p.P, Ne, p.a, p.log2_x, coupling, Mq, phi_q, Mq)
        dAG[q] = R_star - phi_q
    return dR1, dR2, dAG


def _symmetric_T_tilde(M, Q, qbar, Ne):
    Mq = M * (Q - qbar) // Q
    return Mq * Ne + 1 - min(Q, (2 * M - 1) * Q // M - 2 * qbar)


def corollary2_bound(M: int, Q: int, qbar: int, Nt: int, B: float, P_max: float) -> BoundReport:
    """PaQ bound under the rotating symmetric allocation (all MSs equal)."""
    if Q % M or (M * qbar) % Q:
        raise ValueError(f"need Q/M and M*qbar/Q integral (M={M}, Q={Q}, qbar={qbar})")
    p = BoundParams(M, Q, Nt, B, P_max, qbar)
    Ne = p.Nt_eff
    Mq = M * (Q - qbar) // Q
    T_tilde = _symmetric_T_tilde(M, Q, qbar, Ne)
    if T_tilde < 1:
        raise ValueError(f"effective diversity order {T_tilde} < 1")
    R_star = perfect_csi_rate_phi(p.T, P_max / Q / M)
    phi_t = perfect_csi_rate_phi(T_tilde, p.P / M)
    dR1, dR2 = _loss_terms(p.P, Ne, p.a, p.log2_x, (Q - qbar - 1) * Ne / M, Mq,
                           phi_t, Mq)
    dAG = R_star - phi_t
    return BoundReport(dR1, dR2, dAG, R_star, R_star - dR1 - dR2 - dAG)


def corollary3_approx(params: BoundParams, consistent_subscript: bool = False) -> float:
    """Leading large-``B`` term of the symmetric PaQ loss ``dR1 + dR2``.

    The dispersion constant uses subscript ``M``; with
    ``consistent_subscript=True`` it uses the number of serving S-RRHs
    ``(1 - qbar/Q) M`` instead, matching the full symmetric bound.
    """
    p = params
    Mq = p.M * (p.Q - p.qbar) // p.Q
    return _leading_term(p.P, p.Nt_eff, p.a, p.log2_x, Mq,
                         Mq if consistent_subscript else p.M)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------
def lower_bound_report(scheme: str, params: BoundParams, stats: ServingStats | None = None) -> BoundReport:
    """Assemble the lower bound ``R_star - dR1 - dR2 - dAG``.

    For ``scheme="paq"`` without ``stats`` the symmetric allocation is
    assumed. With ``stats`` the per-MS terms are averaged, which bounds the
    mean throughput.
    """
    if scheme == "standard":
        p = params.standard()
        dR1, dR2 = theorem1_bound(p)
        R_star = perfect_csi_rate_phi(p.T, p.P / p.M)
        return BoundReport(dR1, dR2, 0.0, R_star, R_star - dR1 - dR2)
    if scheme != "paq":
        raise ValueError(f"unknown scheme {scheme!r}")
    p = params
    if stats is None:
        return corollary2_bound(p.M, p.Q, p.qbar, p.Nt, p.B, p.P_max)
    dR1, dR2, dAG = theorem2_bound(p, stats)
    R_star = perfect_csi_rate_phi(p.T, p.P_max / p.Q / p.M)
    raw = R_star - dR1 - dR2 - dAG
    return BoundReport(float(dR1.mean()), float(dR2.mean()), float(dAG.mean()), R_star,
                       float(raw.mean()))


def symmetric_stats(M: int, Q: int, qbar: int) -> ServingStats:
    """Serving statistics of the rotating symmetric allocation."""
    return serving_stats(symmetric_policy(M, Q, qbar), Q)
