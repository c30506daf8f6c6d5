"""Time the compiled and numpy kernels on Monte Carlo-sized batches.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--batch 300]

Prints one line per (kernel, shape, backend) with the best wall time and
the speedup of the compiled backend over the numpy one. Both backends are
also checked to agree to 1e-9.
"""
import argparse
import timeit

import numpy as np

from cranzf import kernels

# (D, K): stacked dimension and number of users, as in the simulations
SHAPES = [(16, 8), (32, 8), (24, 12)]


def _inputs(rng, n, D, K):
    H = rng.standard_normal((n, D, K)) + 1j * rng.standard_normal((n, D, K))
    P = rng.standard_normal((n, D, K)) + 1j * rng.standard_normal((n, D, K))
    P /= np.linalg.norm(P, axis=1, keepdims=True)
    return H, P, np.full(n, 10.0)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--batch", type=int, default=300)
    a = ap.parse_args(argv)
    names = kernels.available_backends()
    if "cython" not in names:
        print("compiled extension not built; only the numpy backend is timed")
    rng = np.random.default_rng(0)
    print(f"{'kernel':10s} {'shape':>14s} " + " ".join(f"{n:>12s}" for n in names) + "   speedup")
    for D, K in SHAPES:
        H, P, pw = _inputs(rng, a.batch, D, K)
        for kname, call in (("zf_batch", lambda m: m.zf_batch(H, 1e-12)),
                            ("sinr_batch", lambda m: m.sinr_batch(H, P, pw, 1.0))):
            times, outs = [], []
            for n in names:
                mod = kernels.get_backend(n)
                outs.append(call(mod))
                times.append(min(timeit.repeat(lambda: call(mod), number=1, repeat=a.repeat)))
            if len(outs) == 2:
                r0 = outs[0][0] if isinstance(outs[0], tuple) else outs[0]
                r1 = outs[1][0] if isinstance(outs[1], tuple) else outs[1]
                assert np.allclose(r0, r1, rtol=1e-9, atol=1e-9), "backends disagree"
            speed = f"{times[0] / times[-1]:8.2f}x" if len(times) == 2 else ""
            shape = f"{a.batch}x{D}x{K}"
            print(f"{kname:10s} {shape:>14s} " + " ".join(f"{t * 1e3:10.2f}ms" for t in times)
                  + f"   {speed}")


if __name__ == "__main__":
    main()
