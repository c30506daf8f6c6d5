"""Small dense complex linear algebra and the special functions used by the
rate formulas.

Everything here is a pure function of its arguments.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy import integrate, special

__all__ = [
    "RANK_RTOL",
    "orthonormal_null_basis",
    "scaled_expint",
    "upper_incomplete_gamma_nonpos",
    "confluent_hypergeometric_U",
    "log_beta",
    "log_gamma_ratio",
    "db_to_linear",
    "linear_to_db",
    "dbm_to_watts",
    "watts_to_dbm",
]

#: Singular values below ``RANK_RTOL * s_max`` are treated as zero.
RANK_RTOL = 1e-10

_EPS = np.finfo(float).eps
_FPMIN = 1e-300


# ---------------------------------------------------------------------------
# Unit conversions. Kept in one place: power quantities only (10*log10).
# ---------------------------------------------------------------------------
def db_to_linear(db):
    """Power ratio in dB to linear scale."""
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(w):
    return 10.0 * np.log10(np.asarray(w, dtype=float)) + 30.0


# ---------------------------------------------------------------------------
# Null spaces
# ---------------------------------------------------------------------------
def _as_columns(vectors: Sequence[np.ndarray] | np.ndarray, dim: int) -> np.ndarray:
    if isinstance(vectors, np.ndarray) and vectors.ndim == 2:
        V = np.asarray(vectors, dtype=complex)
        if V.shape[0] != dim:
            raise ValueError(f"vectors have length {V.shape[0]}, expected {dim}")
        return V
    cols = []
    for i, v in enumerate(vectors):
        v = np.asarray(v, dtype=complex).reshape(-1)
        if v.shape[0] != dim:
            raise ValueError(f"vector {i} has length {v.shape[0]}, expected {dim}")
        cols.append(v)
    if not cols:
        return np.zeros((dim, 0), dtype=complex)
    return np.stack(cols, axis=1)


def orthonormal_null_basis(vectors, dim: int) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of ``span(vectors)``.

    Parameters
    ----------
    vectors : sequence of array_like or ndarray of shape (dim, k)
        Spanning vectors (as a list, or as the columns of a matrix).
    dim : int
        Ambient dimension.

    Returns
    -------
    N : ndarray, shape (dim, dim - rank)
        ``N^H N = I`` and ``v^H N = 0`` for every input ``v``.

    Notes
    -----
    The basis is fixed deterministically: the span is orthonormalized
    (rank from singular values relative to ``RANK_RTOL``), then coordinate
    vectors ``e_1, e_2, ...`` are Gram-Schmidt'ed against it in index order
    and kept when they add a new direction.
    """
    if dim < 1:
        raise ValueError("dim must be positive")
    V = _as_columns(vectors, dim)
    if not np.all(np.isfinite(V)):
        raise ValueError("vectors contain non-finite entries")

    if V.shape[1]:
        U, s, _ = np.linalg.svd(V, full_matrices=False)
        rank = int(np.sum(s > RANK_RTOL * s[0])) if s[0] > 0 else 0
        span = U[:, :rank]
    else:
        rank = 0
        span = np.zeros((dim, 0), dtype=complex)
    if rank >= dim:
        raise ValueError("vectors span the whole space; null space is empty")

    basis = [span[:, i] for i in range(rank)]
    out = []
    for i in range(dim):
        if len(basis) == dim:
            break
        w = np.zeros(dim, dtype=complex)
        w[i] = 1.0
        # two passes of classical GS keep orthogonality at machine precision
        for _ in range(2):
            for b in basis:
                w -= b * np.vdot(b, w)
        nw = np.linalg.norm(w)
        if nw > 1e-6:
            w /= nw
            basis.append(w)
            out.append(w)
    return np.stack(out, axis=1)


# ---------------------------------------------------------------------------
# Exponential integrals / incomplete gamma at non-positive integer order
# ---------------------------------------------------------------------------
def _scaled_expint_cf(n: int, x: float) -> float:
    # modified Lentz on the Legendre continued fraction, converges for x > 1
    b = x + n
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, 100000):
        an = -i * (n - 1 + i)
        b += 2.0
        d = an * d + b
        if abs(d) < _FPMIN:
            d = _FPMIN
        d = 1.0 / d
        c = b + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            return h
    raise RuntimeError(f"continued fraction for E_{n}({x}) did not converge")


def scaled_expint(n: int, x: float) -> float:
    """``exp(x) * E_n(x)`` for integer ``n >= 1`` and ``x > 0``.

    For ``x <= 1`` the value starts from ``E_1`` and climbs the recurrence
    ``E_{n+1} = (exp(-x) - x E_n) / n`` (stable there since ``x/n <= 1``);
    for ``x > 1`` it evaluates the continued fraction directly.
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    if not x > 0:
        raise ValueError("x must be positive")
    if x > 1.0:
        return _scaled_expint_cf(n, float(x))
    s = math.exp(x) * float(special.exp1(x))
    for k in range(1, n):
        s = (1.0 - x * s) / k
    return s


def upper_incomplete_gamma_nonpos(k: int, x: float) -> float:
    """Upper incomplete gamma ``Gamma(-k, x)`` for integer ``k >= 0``.

    Uses ``Gamma(-k, x) = x^{-k} E_{k+1}(x)``; for ``x <= 1`` this is the
    downward recurrence in the order starting at ``Gamma(0, x) = E_1(x)``.
    Values outside the double range come back as ``inf`` or ``0.0``.
    """
    k = int(k)
    if k < 0:
        raise ValueError("k must be a nonnegative integer")
    if not x > 0:
        raise ValueError("x must be positive")
    se = scaled_expint(k + 1, x)
    log_val = -k * math.log(x) - x + math.log(se)
    if log_val > 709.0:
        return math.inf
    if -700.0 < -k * math.log(x) < 700.0 and x < 700.0:
        # direct product keeps ~1 ulp per factor; exp(log_val) would lose |log_val| ulps
        return se * math.exp(-x) * x ** (-k)
    return math.exp(log_val)


# ---------------------------------------------------------------------------
# Confluent hypergeometric function of the second kind
# ---------------------------------------------------------------------------
def confluent_hypergeometric_U(a: float, b: float, z: float) -> float:
    """Tricomi ``U(a, b, z)`` from its Laplace-type integral.

    ``U = 1/Gamma(a) * int_0^inf exp(-z t) t^(a-1) (1+t)^(b-a-1) dt``,
    evaluated with adaptive Gauss-Kronrod quadrature (QUADPACK) at
    ``epsrel=1e-12``. For ``a = 1/2`` the substitution ``t = u^2`` removes the
    endpoint singularity.
    """
    if not a > 0:
        raise ValueError("a must be positive")
    if not z > 0:
        raise ValueError("z must be positive")
    c = b - a - 1.0
    opts = dict(epsabs=0.0, epsrel=1e-12, limit=500)
    if a == 0.5:
        f = lambda u: math.exp(-z * u * u + c * math.log1p(u * u))
        # integrand decays on scale min(1/sqrt(z), 1/sqrt(|c|)); split there
        scale = min(1.0 / math.sqrt(z), 1.0 / math.sqrt(max(abs(c), 1e-300)))
        head, _ = integrate.quad(f, 0.0, scale, **opts)
        tail, _ = integrate.quad(f, scale, np.inf, **opts)
        return 2.0 * (head + tail) / math.sqrt(math.pi)
    g = lambda t: math.exp(-z * t + c * math.log1p(t))
    head, _ = integrate.quad(g, 0.0, 1.0, weight="alg", wvar=(a - 1.0, 0.0), **opts)
    h = lambda t: math.exp(-z * t + (a - 1.0) * math.log(t) + c * math.log1p(t))
    tail, _ = integrate.quad(h, 1.0, np.inf, **opts)
    return (head + tail) / math.gamma(a)


# ---------------------------------------------------------------------------
# Beta / Gamma in log domain
# ---------------------------------------------------------------------------
# Stirling remainder coefficients B_{2j} / (2j (2j-1))
_STIRLING = (1 / 12, -1 / 360, 1 / 1260, -1 / 1680, 1 / 1188, -691 / 360360)


def _stirling_corr(z: float) -> float:
    zi = 1.0 / z
    zi2 = zi * zi
    acc = 0.0
    p = zi
    for coef in _STIRLING:
        acc += coef * p
        p *= zi2
    return acc


def log_gamma_ratio(x: float, c: float) -> float:
    """``ln Gamma(x + c) - ln Gamma(x)`` without cancellation for large ``x``."""
    if x < 20.0 or x + c < 20.0:
        return float(special.gammaln(x + c) - special.gammaln(x))
    # (x+c-1/2) ln(x+c) - (x-1/2) ln x - c + corr(x+c) - corr(x)
    return (
        c * math.log(x)
        + (x + c - 0.5) * math.log1p(c / x)
        - c
        + _stirling_corr(x + c)
        - _stirling_corr(x)
    )


def log_beta(x: float, y: float) -> float:
    """Natural log of the Beta function, stable when one argument is huge."""
    if not (x > 0 and y > 0):
        raise ValueError("log_beta needs positive arguments")
    big, small = (x, y) if x >= y else (y, x)
    if big < 20.0:
        return float(special.gammaln(x) + special.gammaln(y) - special.gammaln(x + y))
    return float(special.gammaln(small)) - log_gamma_ratio(big, small)
