"""Experiment specs, sweep runners and result files.

Two setups are supported:

``symmetric``
    Equal attenuation ``1/M`` on every link, unit noise, fixed per-MS power,
    rotating symmetric PaQ allocation; closed-form bounds are reported next
    to the Monte Carlo rates.
``random_placement``
    MSs dropped uniformly over a hexagonal layout with distance pathloss,
    noise in dBm, equal power backoff and weakest-link PaQ allocation.

For each sweep point the standard scheme is maximized over the active
antenna count and PaQ over the number of discarded MSs; every candidate
evaluation is kept in an audit table.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from .bounds import BoundParams, lower_bound_report
from .channel import ClusterConfig, HexGeometry, MIN_DISTANCE_KM, place_random
from .numerics import db_to_linear, dbm_to_watts
from .precoding import paq_allocate, reallocate_unserved, serving_stats, symmetric_policy
from .rates import RateEstimate, bits_per_vector, perfect_csi_rate_phi, simulate_trials

__all__ = [
    "SCHEMA_VERSION",
    "SpecError",
    "ExperimentSpec",
    "ResultRow",
    "ResultTable",
    "AuditRow",
    "load_spec",
    "parse_spec",
    "dump_spec",
    "run_experiment",
    "run_symmetric_sweep",
    "run_random_placement",
    "emit_outputs",
    "RESULT_COLUMNS",
    "default_spec_path",
]

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
RESULT_COLUMNS = ("sweep_var", "value", "scheme", "chosen_nt", "chosen_qbar",
                  "rate_mean", "rate_se", "bound", "phi")
_SWEEP_VARS = {"symmetric": ("B_bits", "P_max_db"), "random_placement": ("B_bits", "P_max_dbm")}
_TAG_PLACEMENT = 2


class SpecError(ValueError):
    """Invalid experiment spec; the message names the file line and field."""


# ---------------------------------------------------------------------------
# Spec
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class ExperimentSpec:
    """Everything needed to reproduce one experiment.

    Power fields carry their unit in the name: ``P_max_db`` is relative to
    unit noise (symmetric setup), ``P_max_dbm`` and ``noise_dbm`` are
    absolute (random placement).
    """

    setup: str
    sweep_variable: str
    sweep_values: tuple
    name: str = "experiment"
    M: int = 4
    Q: int = 8
    Nt: int = 8
    B_bits: float | None = None
    P_max_db: float | None = None
    P_max_dbm: float | None = None
    noise_dbm: float = -121.0
    trials: int = 300
    placements: int = 20
    nt_candidates: tuple = (2, 3, 4, 5, 6, 7, 8)
    qbar_candidates: tuple = (0, 2, 4, 6)
    paq_nt_candidates: tuple = (8,)
    schemes: tuple = ("standard", "paq")
    quantizer: str = "surrogate"
    power: str | None = None
    edge_m: float = 100.0
    min_distance_km: float = MIN_DISTANCE_KM
    seed: int = 1
    workers: int = 1
    output_dir: str = "results"
    plots: bool = True
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        for name in ("sweep_values", "nt_candidates", "qbar_candidates", "paq_nt_candidates",
                     "schemes"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        self.validate()
        object.__setattr__(self, "power", self.power_mode)

    @property
    def power_mode(self) -> str:
        if self.power is not None:
            return self.power
        return "fixed" if self.setup == "symmetric" else "backoff"

    def validate(self):
        def bad(fieldname, msg):
            raise SpecError(f"field '{fieldname}': {msg}")

        if self.schema_version != SCHEMA_VERSION:
            bad("schema_version", f"unsupported version {self.schema_version} (expected {SCHEMA_VERSION})")
        if self.setup not in _SWEEP_VARS:
            bad("setup", f"must be one of {sorted(_SWEEP_VARS)}, got {self.setup!r}")
        if self.sweep_variable not in _SWEEP_VARS[self.setup]:
            bad("sweep.variable", f"must be one of {_SWEEP_VARS[self.setup]} for setup {self.setup!r}")
        if not self.sweep_values:
            bad("sweep.values", "grid is empty")
        for k in ("M", "Q", "Nt", "trials", "placements", "workers"):
            if int(getattr(self, k)) < 1:
                bad(k, "must be >= 1")
        fixed = [v for v in ("B_bits", "P_max_db", "P_max_dbm") if v != self.sweep_variable
                 and v in ("B_bits",) + _SWEEP_VARS[self.setup][1:]]
        for v in fixed:
            if getattr(self, v) is None:
                bad(v, f"required when sweeping {self.sweep_variable}")
        if not self.nt_candidates:
            bad("nt_candidates", "empty")
        for nt in self.nt_candidates + self.paq_nt_candidates:
            if not 2 <= nt <= self.Nt:
                bad("nt_candidates", f"{nt} outside [2, {self.Nt}]")
        hi = min(self.Q - 1, self.Nt - 1)
        for qb in self.qbar_candidates:
            if not 0 <= qb <= hi:
                bad("qbar_candidates", f"{qb} outside [0, {hi}]")
        if not self.schemes or any(x not in ("standard", "paq", "perfect") for x in self.schemes):
            bad("schemes", "nonempty subset of standard, paq, perfect")
        if self.quantizer not in ("surrogate", "explicit"):
            bad("quantizer", "must be 'surrogate' or 'explicit'")
        if self.power not in (None, "fixed", "backoff"):
            bad("power", "must be 'fixed' or 'backoff'")
        if self.setup == "symmetric" and self.Q % self.M:
            bad("Q", "symmetric setup needs Q divisible by M")
        if self.setup == "random_placement" and self.M != len(HexGeometry(edge_m=self.edge_m).centers):
            bad("cluster.M", "the hexagonal layout has 4 S-RRHs")
        if self.sweep_variable == "B_bits":
            for b in self.sweep_values:
                if not b >= self.Q:
                    bad("sweep.values", f"B={b} gives less than one bit per vector")
        elif self.B_bits is not None and not self.B_bits >= self.Q:
            bad("B_bits", "less than one bit per vector")

    def point(self, value):
        """(B, P_max in linear units) at one sweep value."""
        B = value if self.sweep_variable == "B_bits" else self.B_bits
        if self.setup == "symmetric":
            pdb = value if self.sweep_variable == "P_max_db" else self.P_max_db
            return B, float(db_to_linear(pdb))
        pdbm = value if self.sweep_variable == "P_max_dbm" else self.P_max_dbm
        return B, float(dbm_to_watts(pdbm))

    def to_dict(self) -> dict:
        d = {
            "schema_version": self.schema_version,
            "name": self.name,
            "setup": self.setup,
            "cluster": {"M": self.M, "Q": self.Q, "Nt": self.Nt},
            "sweep": {"variable": self.sweep_variable, "values": list(self.sweep_values)},
            "fixed": {k: getattr(self, k) for k in ("B_bits", "P_max_db", "P_max_dbm")
                      if getattr(self, k) is not None},
            "trials": self.trials,
            "nt_candidates": list(self.nt_candidates),
            "qbar_candidates": list(self.qbar_candidates),
            "paq_nt_candidates": list(self.paq_nt_candidates),
            "schemes": list(self.schemes),
            "quantizer": self.quantizer,
            "power": self.power_mode,
            "seed": self.seed,
            "workers": self.workers,
            "output": {"dir": self.output_dir, "plots": self.plots},
        }
        if self.setup == "random_placement":
            d["placements"] = self.placements
            d["noise_dbm"] = self.noise_dbm
            d["geometry"] = {"edge_m": self.edge_m, "min_distance_km": self.min_distance_km}
        return d


_TOP_KEYS = {"schema_version", "name", "setup", "cluster", "sweep", "fixed", "trials", "schemes",
             "placements", "nt_candidates", "qbar_candidates", "paq_nt_candidates",
             "quantizer", "power", "noise_dbm", "geometry", "seed", "workers", "output"}
_SUB_KEYS = {"cluster": {"M", "Q", "Nt"}, "sweep": {"variable", "values"},
             "fixed": {"B_bits", "P_max_db", "P_max_dbm"},
             "geometry": {"edge_m", "min_distance_km"}, "output": {"dir", "plots"}}


def _line_index(node, path=(), out=None):
    """Map dotted field paths to 1-based source lines."""
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            p = path + (str(k.value),)
            out[".".join(p)] = k.start_mark.line + 1
            _line_index(v, p, out)
    return out


def _num(x, name, kind=float):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise SpecError(f"field '{name}': expected a number, got {x!r}")
    if kind is int:
        if x != int(x):
            raise SpecError(f"field '{name}': expected an integer, got {x!r}")
        return int(x)
    return float(x)


def _int_list(x, name):
    if not isinstance(x, list):
        raise SpecError(f"field '{name}': expected a list")
    return tuple(_num(v, name, int) for v in x)


def _from_mapping(d) -> ExperimentSpec:
    if not isinstance(d, dict):
        raise SpecError("spec must be a mapping at top level")
    for k in d:
        if k not in _TOP_KEYS:
            raise SpecError(f"field '{k}': unknown field")
    for k, allowed in _SUB_KEYS.items():
        sub = d.get(k, {})
        if not isinstance(sub, dict):
            raise SpecError(f"field '{k}': expected a mapping")
        for kk in sub:
            if kk not in allowed:
                raise SpecError(f"field '{k}.{kk}': unknown field")
    for req in ("setup", "sweep"):
        if req not in d:
            raise SpecError(f"field '{req}': required")
    sweep = d["sweep"]
    if "variable" not in sweep or "values" not in sweep:
        raise SpecError("field 'sweep': needs 'variable' and 'values'")
    if not isinstance(sweep["values"], list):
        raise SpecError("field 'sweep.values': expected a list")
    kw = dict(setup=d["setup"], sweep_variable=sweep["variable"],
              sweep_values=tuple(_num(v, "sweep.values") for v in sweep["values"]))
    cl = d.get("cluster", {})
    for k in ("M", "Q", "Nt"):
        if k in cl:
            kw[k] = _num(cl[k], f"cluster.{k}", int)
    for k, v in d.get("fixed", {}).items():
        kw[k] = _num(v, f"fixed.{k}")
    for k in ("trials", "placements", "seed", "workers", "schema_version"):
        if k in d:
            kw[k] = _num(d[k], k, int)
    for k in ("nt_candidates", "qbar_candidates", "paq_nt_candidates"):
        if k in d:
            kw[k] = _int_list(d[k], k)
    if "schemes" in d:
        if not isinstance(d["schemes"], list):
            raise SpecError("field 'schemes': expected a list")
        kw["schemes"] = tuple(str(x) for x in d["schemes"])
    for k in ("name", "quantizer", "power"):
        if k in d:
            kw[k] = d[k]
    if "noise_dbm" in d:
        kw["noise_dbm"] = _num(d["noise_dbm"], "noise_dbm")
    geo = d.get("geometry", {})
    if "edge_m" in geo:
        kw["edge_m"] = _num(geo["edge_m"], "geometry.edge_m")
    if "min_distance_km" in geo:
        kw["min_distance_km"] = _num(geo["min_distance_km"], "geometry.min_distance_km")
    out = d.get("output", {})
    if "dir" in out:
        kw["output_dir"] = str(out["dir"])
    if "plots" in out:
        kw["plots"] = bool(out["plots"])
    return ExperimentSpec(**kw)


def parse_spec(text: str, source: str = "<spec>") -> ExperimentSpec:
    """Parse YAML spec text; errors carry ``source:line``."""
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = f":{mark.line + 1}" if mark is not None else ""
        raise SpecError(f"{source}{line}: malformed YAML: {getattr(exc, 'problem', exc)}") from None
    lines = _line_index(node) if node is not None else {}
    try:
        return _from_mapping(data)
    except SpecError as exc:
        msg = str(exc)
        fieldname = msg.split("'")[1] if msg.startswith("field '") else ""
        line = lines.get(fieldname)
        while line is None and "." in fieldname:
            fieldname = fieldname.rsplit(".", 1)[0]
            line = lines.get(fieldname)
        where = f"{source}:{line}" if line else source
        raise SpecError(f"{where}: {msg}") from None


def load_spec(path) -> ExperimentSpec:
    path = Path(path)
    return parse_spec(path.read_text(), str(path))


def dump_spec(spec: ExperimentSpec) -> str:
    return yaml.safe_dump(spec.to_dict(), sort_keys=False)


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class ResultRow:
    sweep_var: str
    value: float
    scheme: str
    chosen_nt: int
    chosen_qbar: int
    rate_mean: float
    rate_se: float
    bound: float
    phi: float


@dataclass(frozen=True)
class AuditRow:
    """One candidate evaluation (``placement = -1`` in the symmetric setup)."""

    value: float
    scheme: str
    placement: int
    nt: int
    qbar: int
    rate_mean: float
    rate_se: float
    bound_raw: float
    phi: float
    resampled: int
    chosen: int


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _parse_like(kind, s):
    if kind is float:
        return float(s)
    if kind is int:
        return int(s)
    return s


def _rows_to_csv(rows, cls) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    names = [f.name for f in fields(cls)]
    w.writerow(names)
    for r in rows:
        w.writerow([_fmt(getattr(r, n)) for n in names])
    return buf.getvalue()


def _rows_from_csv(text, cls):
    rdr = csv.reader(io.StringIO(text))
    header = next(rdr)
    fl = {f.name: f for f in fields(cls)}
    if header != list(fl):
        raise ValueError(f"unexpected header {header}")
    kinds = {f.name: {"float": float, "int": int, "str": str}[f.type] for f in fields(cls)}
    return [cls(**{n: _parse_like(kinds[n], v) for n, v in zip(header, rec)}) for rec in rdr]


@dataclass
class ResultTable:
    rows: list
    audit: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def to_csv(self) -> str:
        return _rows_to_csv(self.rows, ResultRow)

    def audit_csv(self) -> str:
        return _rows_to_csv(self.audit, AuditRow)

    @classmethod
    def from_csv(cls, text: str, audit_text: str | None = None) -> "ResultTable":
        rows = _rows_from_csv(text, ResultRow)
        audit = _rows_from_csv(audit_text, AuditRow) if audit_text else []
        return cls(rows, audit)

    def select(self, scheme: str):
        return [r for r in self.rows if r.scheme == scheme]

    def __eq__(self, other):
        return (isinstance(other, ResultTable) and _same_rows(self.rows, other.rows)
                and _same_rows(self.audit, other.audit))


def _same_rows(a, b) -> bool:
    """Row-wise equality where NaN matches NaN (missing bounds stay comparable)."""
    def key(x):
        return tuple("nan" if isinstance(v, float) and math.isnan(v) else v
                     for v in astuple(x))

    return len(a) == len(b) and all(key(x) == key(y) for x, y in zip(a, b))


# ---------------------------------------------------------------------------
# Job execution
# ---------------------------------------------------------------------------
def _run_jobs(fn, jobs, workers):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    return [fn(j) for j in jobs]


def _mc_job(job):
    cfg, scheme, B, trials, seed, kw = job
    rates, resampled, _ = simulate_trials(cfg, scheme, B, trials, seed, **kw)
    est = RateEstimate.from_samples(rates.mean(axis=1))
    return est, resampled


def _symmetric_bound(scheme, M, Q, nt, qbar, B, P_max):
    """Floor-consistent bound and the scheme's perfect-CSI rate (nan if none)."""
    if scheme == "perfect":
        return math.nan, math.nan
    try:
        if scheme == "standard":
            Bq = Q * bits_per_vector(B, Q)
            rep = lower_bound_report("standard", BoundParams(M, Q, nt, Bq, P_max))
        else:
            Bq = (Q - qbar) * bits_per_vector(B, Q - qbar)
            rep = lower_bound_report("paq", BoundParams(M, Q, nt, Bq, P_max, qbar))
        return rep.lower_bound_raw, rep.phi
    except ValueError:
        return math.nan, math.nan


def _symmetric_phi(scheme, M, Q, nt, qbar, P_max):
    if scheme in ("standard", "perfect"):
        return perfect_csi_rate_phi(M * nt - Q + 1, P_max / Q / M)
    st = serving_stats(symmetric_policy(M, Q, qbar), Q)
    T = int(st.T_tilde(nt - qbar).min())
    return perfect_csi_rate_phi(T, P_max / (Q - qbar) / M) if T >= 1 else math.nan


def _symmetric_candidates(spec):
    out = []
    for scheme in ("standard", "perfect"):
        if scheme in spec.schemes:
            out += [(scheme, nt, 0) for nt in spec.nt_candidates if spec.M * nt >= spec.Q]
    for nt in spec.paq_nt_candidates if "paq" in spec.schemes else ():
        for qb in spec.qbar_candidates:
            if qb >= nt or (qb * spec.M) % spec.Q:
                log.info("skip PaQ nt=%d qbar=%d: infeasible", nt, qb)
                continue
            st = serving_stats(symmetric_policy(spec.M, spec.Q, qb), spec.Q)
            if np.any(st.T_tilde(nt - qb) < 1):
                log.info("skip PaQ nt=%d qbar=%d: too few effective dimensions", nt, qb)
                continue
            out.append(("paq", nt, qb))
    return out


def run_symmetric_sweep(spec: ExperimentSpec) -> ResultTable:
    """Monte Carlo rates and bounds for the equal-attenuation cluster.

    Channels are shared across sweep points and candidates (same seed and
    stream key), so curves are smooth and comparisons paired.
    """
    if spec.setup != "symmetric":
        raise ValueError("run_symmetric_sweep needs setup 'symmetric'")
    cands = _symmetric_candidates(spec)
    jobs, meta = [], []
    for value in spec.sweep_values:
        B, P_max = spec.point(value)
        cfg = ClusterConfig.symmetric(spec.M, spec.Q, spec.Nt, P_max)
        for scheme, nt, qb in cands:
            disc = symmetric_policy(spec.M, spec.Q, qb) if scheme == "paq" else None
            kw = dict(Nt=nt, discard=disc, quantizer=spec.quantizer, power=spec.power_mode)
            jobs.append((cfg, scheme, B, spec.trials, spec.seed, kw))
            meta.append((value, B, P_max, scheme, nt, qb))
    results = _run_jobs(_mc_job, jobs, spec.workers)

    rows, audit = [], []
    for value in spec.sweep_values:
        for scheme in ("standard", "paq", "perfect"):
            idx = [i for i, m in enumerate(meta) if m[0] == value and m[3] == scheme]
            if not idx:
                continue
            best = max(idx, key=lambda i: (results[i][0].mean, -i))
            bounds = []
            for i in idx:
                _, B, P_max, _, nt, qb = meta[i]
                braw, _ = _symmetric_bound(scheme, spec.M, spec.Q, nt, qb, B, P_max)
                phi = _symmetric_phi(scheme, spec.M, spec.Q, nt, qb, P_max)
                est, res = results[i]
                bounds.append(braw)
                audit.append(AuditRow(float(value), scheme, -1, nt, qb, est.mean,
                                      est.std_error, float(braw), float(phi), int(res),
                                      int(i == best)))
            finite = [b for b in bounds if not math.isnan(b)]
            bound = max(0.0, max(finite)) if finite else math.nan
            _, B, P_max, _, nt, qb = meta[best]
            rows.append(ResultRow(spec.sweep_variable, float(value), scheme, nt, qb,
                                  results[best][0].mean, results[best][0].std_error,
                                  float(bound),
                                  float(_symmetric_phi(scheme, spec.M, spec.Q, nt, qb, P_max))))
    return ResultTable(rows, audit)


def _placement_alpha(spec, i):
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(_TAG_PLACEMENT, i)))
    geo = HexGeometry(edge_m=spec.edge_m)
    return place_random(geo, spec.Q, rng, spec.min_distance_km).alpha()


def _placement_candidates(spec, alpha, log_notes):
    out = []
    for scheme in ("standard", "perfect"):
        if scheme in spec.schemes:
            out += [(scheme, nt, 0, None) for nt in spec.nt_candidates if spec.M * nt >= spec.Q]
    for qb in spec.qbar_candidates if "paq" in spec.schemes else ():
        if qb == 0:
            out.append(("paq", spec.Nt, 0, tuple(() for _ in range(spec.M))))
            continue
        disc = reallocate_unserved(alpha, paq_allocate(alpha, qb, spec.Nt))
        st = serving_stats(disc, spec.Q)
        if np.any(st.T_tilde(spec.Nt - qb) < 1):
            log_notes.append(f"qbar={qb} infeasible for this placement (effective dimensions)")
            continue
        out.append(("paq", spec.Nt, qb, disc))
    return out


def run_random_placement(spec: ExperimentSpec) -> ResultTable:
    """Throughput averaged over MS placements.

    For each placement the standard scheme is maximized over active antennas
    and PaQ over the number of discarded MSs; the table reports the
    placement average of these maxima. ``rate_se`` is the Monte Carlo error
    of that average given the placements; ``chosen_*`` is the most frequent
    per-placement choice (all choices are in the audit table).
    """
    if spec.setup != "random_placement":
        raise ValueError("run_random_placement needs setup 'random_placement'")
    noise = float(dbm_to_watts(spec.noise_dbm))
    notes = []
    alphas = [_placement_alpha(spec, i) for i in range(spec.placements)]
    cands = [_placement_candidates(spec, a, notes) for a in alphas]
    jobs, meta = [], []
    for value in spec.sweep_values:
        B, P_max = spec.point(value)
        for i, alpha in enumerate(alphas):
            cfg = ClusterConfig(spec.M, spec.Q, spec.Nt, P_max, noise, alpha)
            for scheme, nt, qb, disc in cands[i]:
                kw = dict(Nt=nt, discard=disc, quantizer=spec.quantizer,
                          power=spec.power_mode, key=(i,))
                jobs.append((cfg, scheme, B, spec.trials, spec.seed, kw))
                meta.append((value, i, scheme, nt, qb))
    results = _run_jobs(_mc_job, jobs, spec.workers)

    rows, audit = [], []
    for value in spec.sweep_values:
        for scheme in ("standard", "paq", "perfect"):
            best_means, best_se2, choices = [], [], []
            for i in range(spec.placements):
                idx = [k for k, m in enumerate(meta) if m[0] == value and m[1] == i and m[2] == scheme]
                if not idx:
                    continue
                best = max(idx, key=lambda k: (results[k][0].mean, -k))
                for k in idx:
                    est, res = results[k]
                    audit.append(AuditRow(float(value), scheme, i, meta[k][3], meta[k][4],
                                          est.mean, est.std_error, math.nan, math.nan,
                                          int(res), int(k == best)))
                best_means.append(results[best][0].mean)
                best_se2.append(results[best][0].std_error ** 2)
                choices.append((meta[best][3], meta[best][4]))
            if not best_means:
                continue
            n = len(best_means)
            nt, qb = Counter(choices).most_common(1)[0][0]
            rows.append(ResultRow(spec.sweep_variable, float(value), scheme, nt, qb,
                                  float(np.mean(best_means)), math.sqrt(sum(best_se2)) / n,
                                  math.nan, math.nan))
    return ResultTable(rows, audit, sorted(set(notes)))


def run_experiment(spec: ExperimentSpec) -> ResultTable:
    if spec.setup == "symmetric":
        return run_symmetric_sweep(spec)
    return run_random_placement(spec)


# ---------------------------------------------------------------------------
# Outputs
# ---------------------------------------------------------------------------
def _plot(table: ResultTable, spec: ExperimentSpec, path: Path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    styles = {"standard": ("tab:blue", "o"), "paq": ("tab:red", "s")}
    for scheme, (color, marker) in styles.items():
        rs = table.select(scheme)
        if not rs:
            continue
        x = [r.value for r in rs]
        ax.errorbar(x, [r.rate_mean for r in rs], yerr=[2 * r.rate_se for r in rs],
                    color=color, marker=marker, ms=4, capsize=2,
                    label=f"{scheme} (Monte Carlo)")
        b = [r.bound for r in rs]
        if not all(math.isnan(v) for v in b):
            ax.plot(x, b, color=color, ls="--", label=f"{scheme} lower bound")
    unit = {"B_bits": "B [bits per S-RRH]", "P_max_db": "P_max [dB]",
            "P_max_dbm": "P_max [dBm]"}[spec.sweep_variable]
    ax.set_xlabel(unit)
    ax.set_ylabel("rate per MS [bits/s/Hz]")
    ax.set_title(spec.name)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def emit_outputs(table: ResultTable, spec: ExperimentSpec, out_dir=None) -> dict:
    """Write results, candidate audit, resolved spec and (optionally) a plot.

    Returns a mapping from artifact kind to path.
    """
    out = Path(out_dir if out_dir is not None else spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "results": out / "results.csv",
        "audit": out / "candidates.csv",
        "spec": out / "spec.resolved.yaml",
    }
    paths["results"].write_text(table.to_csv())
    paths["audit"].write_text(table.audit_csv())
    paths["spec"].write_text(dump_spec(replace(spec, output_dir=str(out))))
    if table.notes:
        paths["notes"] = out / "notes.txt"
        paths["notes"].write_text("\n".join(table.notes) + "\n")
    if spec.plots:
        paths["plot"] = out / f"rate_vs_{spec.sweep_variable}.svg"
        _plot(table, spec, paths["plot"])
    return paths


def default_spec_path(name: str) -> Path:
    """Path of a bundled spec (``symmetric_b_sweep``, ``random_pmax_sweep``, ...)."""
    here = Path(__file__).parent / "specs"
    p = here / (name if name.endswith(".yaml") else f"{name}.yaml")
    if not p.exists():
        raise FileNotFoundError(f"no bundled spec {name!r}; have {sorted(x.stem for x in here.glob('*.yaml'))}")
    return p
