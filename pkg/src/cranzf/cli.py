"""Command-line entry point: ``cranzf {bound,simulate,sweep,validate}``.

Exit status is 0 on success, 1 when ``validate`` finds a failing check and
2 on any configuration error.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .bounds import (BoundParams, corollary1_approx, corollary2_bound, corollary3_approx,
                     lower_bound_report, symmetric_stats, theorem1_bound, theorem2_bound)
from .channel import ClusterConfig
from .harness import SpecError, default_spec_path, emit_outputs, load_spec, run_experiment
from .numerics import db_to_linear
from .precoding import symmetric_policy
from .rates import ergodic_rate_mc

log = logging.getLogger("cranzf")


class ConfigError(Exception):
    pass


def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v


def _budget(s):
    return math.inf if s.lower() in ("inf", "infinity") else float(s)


def _cluster_args(p, with_b=True):
    p.add_argument("--M", type=_positive_int, default=4, help="S-RRHs")
    p.add_argument("--Q", type=_positive_int, default=8, help="MSs")
    p.add_argument("--Nt", type=_positive_int, default=8, help="active antennas per S-RRH")
    if with_b:
        p.add_argument("--B", type=_budget, required=True, help="feedback bits per S-RRH")
    p.add_argument("--Pmax-db", type=float, required=True, dest="pmax_db",
                   help="per-S-RRH power relative to unit noise, dB")
    p.add_argument("--qbar", type=int, default=0, help="MSs discarded per S-RRH")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cranzf", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"cranzf {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="cmd", required=True)

    b = sub.add_parser("bound", help="evaluate a closed-form rate-loss bound")
    g = b.add_mutually_exclusive_group(required=True)
    g.add_argument("--theorem", type=int, choices=(1, 2))
    g.add_argument("--corollary", type=int, choices=(1, 2, 3))
    _cluster_args(b)
    b.add_argument("--consistent-subscript", action="store_true",
                   help="corollary 3: use the sub-cluster size in the variance term")

    s = sub.add_parser("simulate", help="Monte Carlo ergodic rate, symmetric cluster")
    s.add_argument("--scheme", choices=("standard", "paq", "perfect"), default="standard")
    _cluster_args(s)
    s.add_argument("--quantizer", choices=("surrogate", "explicit"), default="surrogate")
    s.add_argument("--power", choices=("fixed", "backoff"), default="fixed")
    s.add_argument("--trials", type=_positive_int, default=300)
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--workers", type=_positive_int, default=1)

    w = sub.add_parser("sweep", help="run an experiment spec and write its outputs")
    w.add_argument("spec", help="YAML experiment spec, or the name of a bundled one")
    w.add_argument("--seed", type=int)
    w.add_argument("--trials", type=_positive_int)
    w.add_argument("--placements", type=_positive_int)
    w.add_argument("--out", help="output directory (overrides the spec)")
    w.add_argument("--workers", type=_positive_int)
    w.add_argument("--no-plots", action="store_true")

    v = sub.add_parser("validate", help="run the built-in property checks")
    v.add_argument("--seed", type=int, default=7)
    v.add_argument("--suite", metavar="DIR",
                   help="also run the pytest suite in DIR (fast tests only)")
    return ap


# ---------------------------------------------------------------------------
def _cmd_bound(a):
    P = float(db_to_linear(a.pmax_db))
    try:
        if a.theorem == 1 or a.corollary == 1:
            if a.qbar:
                raise ConfigError("theorem/corollary 1 describe the standard scheme; drop --qbar")
            prm = BoundParams(a.M, a.Q, a.Nt, a.B, P)
            if a.theorem == 1:
                d1, d2 = theorem1_bound(prm)
                rep = lower_bound_report("standard", prm)
                print(f"deltaR1     {d1:.10g}\ndeltaR2     {d2:.10g}")
                print(f"phi         {rep.phi:.10g}\nlower_bound {rep.lower_bound:.10g}")
            else:
                print(f"loss_approx {corollary1_approx(prm):.10g}")
        elif a.theorem == 2:
            prm = BoundParams(a.M, a.Q, a.Nt, a.B, P, a.qbar)
            st = symmetric_stats(a.M, a.Q, a.qbar)
            d1, d2, dag = theorem2_bound(prm, st)
            rep = lower_bound_report("paq", prm, st)
            for q in range(a.Q):
                print(f"q={q} deltaR1 {d1[q]:.10g} deltaR2 {d2[q]:.10g} deltaR_AG {dag[q]:.10g}")
            print(f"lower_bound {rep.lower_bound:.10g}")
        elif a.corollary == 2:
            rep = corollary2_bound(a.M, a.Q, a.qbar, a.Nt, a.B, P)
            print(f"deltaR1     {rep.deltaR1:.10g}\ndeltaR2     {rep.deltaR2:.10g}")
            print(f"deltaR_AG   {rep.deltaR_AG:.10g}\nphi         {rep.phi:.10g}")
            print(f"lower_bound {rep.lower_bound:.10g}")
        else:
            prm = BoundParams(a.M, a.Q, a.Nt, a.B, P, a.qbar)
            val = corollary3_approx(prm, consistent_subscript=a.consistent_subscript)
            print(f"loss_approx {val:.10g}")
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return 0


def _cmd_simulate(a):
    P = float(db_to_linear(a.pmax_db))
    try:
        cfg = ClusterConfig.symmetric(a.M, a.Q, a.Nt, P)
        disc = symmetric_policy(a.M, a.Q, a.qbar) if a.scheme == "paq" else None
        t0 = time.perf_counter()
        res = ergodic_rate_mc(a.scheme, cfg, a.B, a.trials, a.seed, discard=disc,
                              quantizer=a.quantizer, power=a.power, workers=a.workers)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    for q, est in enumerate(res.per_ms):
        print(f"q={q} rate {est.mean:.6f} se {est.std_error:.6f}")
    print(f"throughput {res.throughput.mean:.6f} se {res.throughput.std_error:.6f}")
    print(f"resampled {res.resampled}  backend {kernels.BACKEND}  "
          f"elapsed {time.perf_counter() - t0:.2f}s")
    return 0


def _cmd_sweep(a):
    try:
        path = Path(a.spec)
        if not path.exists() and path.suffix in ("", ".yaml") and path.parent == Path("."):
            path = default_spec_path(a.spec)
        spec = load_spec(path)
        over = {k: getattr(a, k) for k in ("seed", "trials", "placements", "workers")
                if getattr(a, k) is not None}
        if a.out:
            over["output_dir"] = a.out
        if a.no_plots:
            over["plots"] = False
        spec = replace(spec, **over)
    except (OSError, SpecError) as exc:
        raise ConfigError(str(exc)) from None
    t0 = time.perf_counter()
    table = run_experiment(spec)
    paths = emit_outputs(table, spec)
    for r in table.rows:
        print(f"{r.sweep_var}={r.value:g} {r.scheme:8s} nt={r.chosen_nt} qbar={r.chosen_qbar} "
              f"rate={r.rate_mean:.4f}±{r.rate_se:.4f} bound={r.bound:.4f}")
    for kind, p in paths.items():
        print(f"wrote {kind}: {p}")
    print(f"elapsed {time.perf_counter() - t0:.1f}s")
    return 0


# ---------------------------------------------------------------------------
def _check_zf(rng):
    from .precoding import zf_precoders_batch

    h = (rng.standard_normal((50, 6, 3, 4)) + 1j * rng.standard_normal((50, 6, 3, 4)))
    p, ok = zf_precoders_batch(h)
    H = h.reshape(50, 6, 12)
    P = p.reshape(50, 6, 12)
    G = np.abs(np.einsum("nji,nqi->njq", H.conj(), P))
    off = G[:, ~np.eye(6, dtype=bool)].max()
    nrm = np.abs(np.linalg.norm(P, axis=2) - 1).max()
    return ok.all() and off < 1e-10 and nrm < 1e-12, f"max residual {off:.1e}, norm err {nrm:.1e}"


def _check_rvq(rng):
    from .bounds import calU
    from .rvq import surrogate_error

    u = rng.random(100_000)
    worst = 0.0
    for N in (2, 4, 8):
        for b in (1, 4, 8):
            z = surrogate_error(u, b, N)
            dev = abs(z.mean() - calU(2.0 ** b, 1.0 / (N - 1))) / (z.std() / math.sqrt(z.size))
            worst = max(worst, dev)
    return worst < 4.0, f"worst moment deviation {worst:.2f} SE"


def _check_phi(rng):
    from .rates import perfect_csi_rate_phi

    cfg = ClusterConfig.symmetric(4, 8, 8, float(db_to_linear(15)))
    res = ergodic_rate_mc("perfect", cfg, math.inf, 1000, int(rng.integers(1 << 30)))
    phi = perfect_csi_rate_phi(25, cfg.P_max / 32)
    z = abs(res.throughput.mean - phi) / res.throughput.std_error
    return z < 4.0, f"MC {res.throughput.mean:.4f} vs closed form {phi:.4f} ({z:.2f} SE)"


def _check_reductions(rng):
    worst = 0.0
    for qbar in (0,):
        prm = BoundParams(4, 8, 8, 160, 1000.0, qbar)
        d1, d2 = theorem1_bound(prm)
        e1, e2, _ = theorem2_bound(prm, symmetric_stats(4, 8, 0))
        worst = max(worst, np.max(np.abs(e1 - d1)), np.max(np.abs(e2 - d2)))
    for qbar in (2, 4, 6):
        prm = BoundParams(4, 8, 8, 160, 1000.0, qbar)
        e1, e2, eag = theorem2_bound(prm, symmetric_stats(4, 8, qbar))
        rep = corollary2_bound(4, 8, qbar, 8, 160, 1000.0)
        worst = max(worst, np.max(np.abs(e1 - rep.deltaR1)), np.max(np.abs(e2 - rep.deltaR2)),
                    np.max(np.abs(eag - rep.deltaR_AG)))
    return worst <= 1e-12, f"max mismatch {worst:.1e}"


def _check_backends(rng):
    names = kernels.available_backends()
    if len(names) < 2:
        return True, f"only {names} available"
    H = rng.standard_normal((20, 16, 8)) + 1j * rng.standard_normal((20, 16, 8))
    outs = [kernels.get_backend(n).zf_batch(np.ascontiguousarray(H), 1e-12)[0] for n in names]
    d = float(np.max(np.abs(outs[0] - outs[1])))
    return d < 1e-9, f"{names[0]} vs {names[1]} max diff {d:.1e}"


_CHECKS = [("zero-forcing exactness", _check_zf), ("quantizer moment identity", _check_rvq),
           ("perfect-CSI closed form", _check_phi), ("bound reductions", _check_reductions),
           ("kernel backends agree", _check_backends)]


def _cmd_validate(a):
    rng = np.random.default_rng(a.seed)
    failed = 0
    for name, fn in _CHECKS:
        ok, info = fn(rng)
        failed += not ok
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {info}")
    if a.suite:
        import pytest

        rc = pytest.main([a.suite, "-q", "-m", "not slow"])
        print(f"[{'PASS' if rc == 0 else 'FAIL'}] pytest suite {a.suite}: exit {int(rc)}")
        failed += rc != 0
    return 1 if failed else 0


def main(argv=None) -> int:
    ap = build_parser()
    a = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(a.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"bound": _cmd_bound, "simulate": _cmd_simulate, "sweep": _cmd_sweep,
               "validate": _cmd_validate}[a.cmd]
    try:
        return handler(a)
    except ConfigError as exc:
        print(f"cranzf: configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
