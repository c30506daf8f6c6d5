"""Backend selection for the Monte Carlo inner kernels.

The compiled extension is used when it imports; otherwise (or when the
environment variable ``CRANZF_PURE_PYTHON`` is set to a non-empty value) the
numpy implementation is used. Both expose ``zf_batch`` and ``sinr_batch``.

``sinr_batch`` always dispatches to numpy: it is one batched matrix product,
which BLAS does faster than the compiled loop (see
``benchmarks/bench_kernels.py``). The compiled version is kept for the
benchmark and the cross-backend tests.
"""
import os

import numpy as np

from . import _pykernels

_compiled = None
if not os.environ.get("CRANZF_PURE_PYTHON"):
    try:
        from . import _ckernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"
_impl = _compiled if _compiled is not None else _pykernels


def available_backends():
    return ["python"] + (["cython"] if _compiled is not None else [])


def get_backend(name):
    """Kernel module by name (``"python"`` or ``"cython"``)."""
    if name == "python":
        return _pykernels
    if name == "cython" and _compiled is not None:
        return _compiled
    raise ValueError(f"backend {name!r} is not available")


def zf_batch(H, rtol=1e-12):
    return _impl.zf_batch(np.ascontiguousarray(H, dtype=np.complex128), rtol)


def sinr_batch(H, P, power, noise):
    return _pykernels.sinr_batch(
        np.ascontiguousarray(H, dtype=np.complex128),
        np.ascontiguousarray(P, dtype=np.complex128),
        np.ascontiguousarray(power, dtype=np.float64),
        float(noise),
    )
