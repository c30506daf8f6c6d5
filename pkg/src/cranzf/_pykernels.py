"""Numpy implementations of the Monte Carlo inner kernels.

Reference behaviour for :mod:`cranzf._ckernels`; selected automatically when
the compiled extension is unavailable.
"""
import numpy as np


def zf_batch(H, rtol=1e-12):
    """Unit-norm zero-forcing directions for a batch of channel matrices.

    Parameters
    ----------
    H : ndarray, shape (n, D, K), complex
        Column ``k`` of ``H[t]`` is the (estimated) channel of user ``k``.
    rtol : float
        A user whose channel has a component orthogonal to the others
        smaller than ``rtol`` times its norm makes the instance degenerate.

    Returns
    -------
    P : ndarray, shape (n, D, K)
        ``P[t, :, k]`` is the normalized projection of ``H[t, :, k]`` onto
        the orthogonal complement of the other columns (``H_k^H P_k > 0``).
        Degenerate instances are returned as zeros.
    ok : ndarray of bool, shape (n,)
    """
    H = np.ascontiguousarray(H, dtype=np.complex128)
    n, D, K = H.shape
    Qm, R = np.linalg.qr(H, mode="reduced")
    diag = np.abs(np.diagonal(R, axis1=1, axis2=2))
    col = np.linalg.norm(H, axis=1)
    ok = np.all(diag > rtol * col, axis=1)
    P = np.zeros_like(H)
    if not ok.any():
        return P, ok
    Rg = R[ok]
    eye = np.broadcast_to(np.eye(K, dtype=np.complex128), Rg.shape)
    # W = H (H^H H)^{-1} = Q R^{-H}
    Y = np.linalg.solve(Rg.conj().transpose(0, 2, 1), eye)
    W = Qm[ok] @ Y
    W /= np.linalg.norm(W, axis=1, keepdims=True)
    P[ok] = W
    return P, ok


def sinr_batch(H, P, power, noise):
    """Per-user SINR under single-user detection.

    ``H`` and ``P`` are (n, D, K) stacks of true channels and transmitted
    precoders (columns per user); ``power`` is (n,) per-user power.
    """
    G = np.abs(np.conj(np.swapaxes(H, 1, 2)) @ P) ** 2
    sig = np.diagonal(G, axis1=1, axis2=2)
    intf = G.sum(axis=2) - sig
    p = np.asarray(power, dtype=float)[:, None]
    return p * sig / (noise + p * intf)
