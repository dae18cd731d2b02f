"""Benchmark sweeps over matrices x signals, reports and CSV exports.

Seeding: matrix ``i`` is drawn from stream ``(0, i)`` of ``master_seed``;
signal and noise ``j`` of that matrix from streams ``(1, i, j)`` and
``(2, i, j)``.  Work items are reduced in ``(matrix, signal, solver)`` order,
so the report does not depend on the number of worker threads.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import classic
from .arch import SolverState, StructuralParams, as_fista_step, as_ista_step, step_weights
from .config import FIXED_SOLVERS, ExperimentConfig
from .hypergrad import hypergradients
from .problem import generate_matrix, generate_noise, generate_signal, make_instance, rng_from
from .solver import RunTrace, SolverDivergence, run_hgd

__all__ = [
    "TRACE_HEADER",
    "SolverSummary",
    "ExperimentReport",
    "run_experiment",
    "write_outputs",
    "export_trace_csv",
    "load_trace_csv",
    "export_heatmap",
    "heatmap_matrix",
    "TimingRow",
    "TimingTable",
    "timing_report",
    "ste_bias_stats",
]

TRACE_HEADER = ("t", "mse", "objective", "surrogate", "gamma",
                "w_r1", "w_x1", "w_z1", "beta_r1", "beta_x1", "beta_z1")


# -- running ---------------------------------------------------------------

@dataclass
class _Outcome:
    mse: Optional[np.ndarray]          # length T+1, initial point first
    final: Optional[np.ndarray]
    seconds: float
    trace: Optional[RunTrace] = None
    failed_at: Optional[int] = None
    params: Optional[StructuralParams] = None


def _draw_matrices(cfg: ExperimentConfig):
    mats = []
    for i in range(cfg.n_matrices):
        A = generate_matrix(cfg.generator, rng_from(cfg.master_seed, 0, i))
        mats.append((A, classic.default_gamma(A)))
    return mats


def _instance(cfg: ExperimentConfig, A, i: int, j: int):
    x_star = generate_signal(cfg.generator, rng_from(cfg.master_seed, 1, i, j))
    noise = generate_noise(cfg.generator, rng_from(cfg.master_seed, 2, i, j))
    return make_instance(A, x_star, noise, cfg.lam)


def _run_one(cfg, name, prob, gamma0, keep_trace, init: Optional[StructuralParams]) -> _Outcome:
    if name in FIXED_SOLVERS:
        run = classic.ista if name == "ista_fixed" else classic.fista
        t0 = time.perf_counter()
        est, ct = run(prob, gamma0, cfg.T)
        secs = time.perf_counter() - t0
        if not np.all(np.isfinite(est)):
            return _Outcome(None, None, secs, failed_at=cfg.T)
        trace = RunTrace.from_classic(ct, prob, cfg.p) if keep_trace else None
        return _Outcome(ct.sq_error, est, secs, trace)

    hcfg = cfg.hgd_config(name)
    fista = hcfg.variant == "fista"
    hcfg = replace(hcfg, init_params=init or StructuralParams.canonical(gamma0, fista=fista))
    t0 = time.perf_counter()
    try:
        est, tr = run_hgd(prob, hcfg)
    except SolverDivergence as exc:
        return _Outcome(None, None, time.perf_counter() - t0, failed_at=exc.iteration)
    secs = time.perf_counter() - t0
    return _Outcome(tr.mse_with_initial(), est, secs, tr if keep_trace else None,
                    params=tr.final_params)


def _run_matrix_block(cfg, A, gamma0, i, signals):
    """Signals of one matrix in order; carries online parameters if asked."""
    carried: Dict[str, Optional[StructuralParams]] = {}
    out = []
    for j in signals:
        prob = _instance(cfg, A, i, j)
        keep = i * cfg.n_signals + j < cfg.trace_limit
        res = {}
        for name in cfg.solvers:
            init = carried.get(name) if cfg.carry_params else None
            res[name] = oc = _run_one(cfg, name, prob, gamma0, keep, init)
            if cfg.carry_params and oc.params is not None:
                carried[name] = oc.params
        out.append((prob.x_star, res))
    return out


@dataclass
class SolverSummary:
    name: str
    mean_mse: np.ndarray
    final_mse: float
    mean_time_ms: float
    n_ok: int
    n_failed: int
    failures: List[Tuple[int, int, int]] = field(default_factory=list)
    training_time_ms: float = 0.0

    def payload(self) -> dict:
        return {
            "mean_mse": [float(v) for v in self.mean_mse],
            "final_mse": float(self.final_mse),
            "n_ok": self.n_ok,
            "n_failed": self.n_failed,
            "failures": [list(f) for f in self.failures],
        }


@dataclass
class ExperimentReport:
    """Aggregated sweep results.

    ``final_iterates[name][k]`` is the last estimate of work item ``k``
    (row-major over matrix, signal; NaN rows for failures) so that the
    reported MSE can be recomputed from raw data.
    """

    config: ExperimentConfig
    summaries: Dict[str, SolverSummary]
    x_star: np.ndarray
    final_iterates: Dict[str, np.ndarray]
    traces: Dict[str, List[Tuple[int, int, RunTrace]]]
    timestamp: str

    @property
    def config_hash(self) -> str:
        return self.config.config_hash()

    def payload(self) -> dict:
        """Deterministic part of the report (no timings, no timestamp)."""
        return {
            "config_hash": self.config_hash,
            "master_seed": self.config.master_seed,
            "n_items": int(self.x_star.shape[0]),
            "solvers": {k: s.payload() for k, s in self.summaries.items()},
        }

    def to_dict(self) -> dict:
        d = self.payload()
        d["timing"] = {k: {"test_per_signal_ms": s.mean_time_ms,
                           "training_ms": s.training_time_ms}
                       for k, s in self.summaries.items()}
        d["metadata"] = {"timestamp": self.timestamp, "config": self.config.to_flat()}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def audit_mse(self, name: str) -> float:
        """Mean squared error recomputed from the stored final iterates."""
        X = self.final_iterates[name]
        ok = np.all(np.isfinite(X), axis=1)
        err = np.sum((X[ok] - self.x_star[ok]) ** 2, axis=1)
        return float(np.sum(err) / ok.sum())


def run_experiment(cfg: ExperimentConfig, workers: Optional[int] = None) -> ExperimentReport:
    """Run every configured solver on every (matrix, signal) pair from ``x = 0``.

    Solver runs that hit a non-finite value are excluded from the means and
    listed in ``failures`` as ``(matrix, signal, iteration)``.
    """
    workers = workers or cfg.workers
    mats = _draw_matrices(cfg)
    if cfg.carry_params:
        blocks = [(i, list(range(cfg.n_signals))) for i in range(cfg.n_matrices)]
    else:
        blocks = [(i, [j]) for i in range(cfg.n_matrices) for j in range(cfg.n_signals)]

    def work(block):
        i, signals = block
        A, g0 = mats[i]
        return [(i, j, xs, res) for j, (xs, res) in zip(signals, _run_matrix_block(cfg, A, g0, i, signals))]

    if workers == 1:
        results = [work(b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, blocks))
    items = [it for block in results for it in block]

    N = cfg.generator.N
    x_star = np.array([xs for _, _, xs, _ in items])
    summaries, finals, traces = {}, {}, {}
    for name in cfg.solvers:
        curves, secs, fails = [], [], []
        F = np.full((len(items), N), np.nan)
        traces[name] = []
        for k, (i, j, _, res) in enumerate(items):
            oc = res[name]
            secs.append(oc.seconds)
            if oc.mse is None:
                fails.append((i, j, oc.failed_at))
                continue
            curves.append(oc.mse)
            F[k] = oc.final
            if oc.trace is not None:
                traces[name].append((i, j, oc.trace))
        mean = np.sum(curves, axis=0) / len(curves) if curves else np.full(cfg.T + 1, np.nan)
        summaries[name] = SolverSummary(
            name=name, mean_mse=mean, final_mse=float(mean[-1]),
            mean_time_ms=1e3 * float(np.mean(secs)), n_ok=len(curves), n_failed=len(fails),
            failures=fails)
        finals[name] = F
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return ExperimentReport(cfg, summaries, x_star, finals, traces, stamp)


# -- exports ----------------------------------------------------------------

def _num(v) -> str:
    v = float(v)
    return "" if math.isnan(v) else repr(v)


def export_trace_csv(trace: RunTrace, path) -> Path:
    """One row per iteration; ``w_*`` columns hold the rounded weights.

    ``w_z1``/``beta_z1`` are empty for ISTA, ``beta_*`` for fixed solvers.
    """
    if trace.T == 0:
        raise ValueError("empty trace")
    path = Path(path)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(TRACE_HEADER)
        for t in range(trace.T):
            wr.writerow([t, _num(trace.mse[t]), _num(trace.objective[t]), _num(trace.surrogate[t]),
                         _num(trace.gamma[t]),
                         *(_num(trace.hard_w[t, s, 0]) for s in range(3)),
                         *(_num(trace.beta[t, s, 0]) for s in range(3))])
    return path


def load_trace_csv(path) -> RunTrace:
    """Inverse of :func:`export_trace_csv` (fields it does not store stay NaN)."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or tuple(rows[0].keys()) != TRACE_HEADER:
        raise ValueError(f"{path}: not a trace CSV")

    def col(key):
        return np.array([float(r[key]) if r[key] != "" else np.nan for r in rows])

    variant = "ista" if all(r["w_z1"] == "" for r in rows) else "fista"
    tr = RunTrace.empty(variant, len(rows), 0)
    tr.mse[:], tr.objective[:], tr.surrogate[:], tr.gamma[:] = (
        col("mse"), col("objective"), col("surrogate"), col("gamma"))
    for s, slot in enumerate("rxz"):
        w1 = col(f"w_{slot}1")
        tr.hard_w[:, s, 0], tr.hard_w[:, s, 1] = w1, 1.0 - w1
        tr.beta[:, s, 0] = col(f"beta_{slot}1")
    return tr


def heatmap_matrix(traces: Sequence[RunTrace]) -> Tuple[List[str], np.ndarray]:
    """Rounded ``w_.1`` per slot (rows, forward order) and trace (columns)."""
    if not traces:
        raise ValueError("no traces")
    variants = {tr.variant for tr in traces}
    if len(variants) != 1:
        raise ValueError(f"mixed variants {sorted(variants)}")
    Ts = {tr.T for tr in traces}
    if len(Ts) != 1:
        raise ValueError(f"traces differ in length: {sorted(Ts)}")
    T = Ts.pop()
    slots = "rxz" if variants.pop() == "fista" else "rx"
    labels = [f"{s}{t}" for t in range(T) for s in slots]
    H = np.empty((len(labels), len(traces)), dtype=int)
    for c, tr in enumerate(traces):
        w = tr.hard_w[:, : len(slots), 0]
        if not np.all((w == 0) | (w == 1)):
            raise ValueError("trace weights are not one-hot")
        H[:, c] = w.reshape(-1).astype(int)
    return labels, H


def export_heatmap(traces: Sequence[RunTrace], path) -> Path:
    labels, H = heatmap_matrix(traces)
    path = Path(path)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["slot"] + [f"trace_{c}" for c in range(H.shape[1])])
        for lab, row in zip(labels, H):
            wr.writerow([lab, *row.tolist()])
    return path


def write_outputs(report: ExperimentReport, outdir) -> Path:
    """Report JSON, mean-MSE and heatmap CSVs, trace CSVs, raw final iterates."""
    outdir = Path(outdir)
    (outdir / "traces").mkdir(parents=True, exist_ok=True)
    (outdir / "report.json").write_text(report.to_json())
    for name, s in report.summaries.items():
        with (outdir / f"{name}_mse.csv").open("w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["t", "mean_mse"])
            for t, v in enumerate(s.mean_mse):
                wr.writerow([t, _num(v)])
        trs = report.traces.get(name, [])
        for i, j, tr in trs:
            export_trace_csv(tr, outdir / "traces" / f"{name}_m{i}_s{j}.csv")
        if trs:
            export_heatmap([tr for _, _, tr in trs], outdir / f"{name}_heatmap.csv")
    np.savez(outdir / "final_iterates.npz", x_star=report.x_star, **report.final_iterates)
    return outdir


# -- timing -----------------------------------------------------------------

@dataclass
class TimingRow:
    solver: str
    per_signal_ms: float
    training_ms: float = 0.0


@dataclass
class TimingTable:
    rows: List[TimingRow]

    def by_name(self) -> Dict[str, TimingRow]:
        return {r.solver: r for r in self.rows}

    def structural_claims(self) -> Dict[str, bool]:
        """Orderings that should hold on any hardware."""
        rows = self.by_name()
        claims = {}
        for hgd, fixed in (("hgd_as_ista", "ista_fixed"), ("hgd_as_fista", "fista_fixed")):
            if hgd in rows and fixed in rows:
                claims[f"{hgd} slower than {fixed}"] = rows[hgd].per_signal_ms > rows[fixed].per_signal_ms
        claims["online solvers need no training"] = all(
            r.training_ms == 0.0 for r in self.rows if r.solver.startswith("hgd"))
        return claims

    def format(self) -> str:
        lines = [f"{'method':<14s} {'training (ms)':>14s} {'test/signal (ms)':>17s}"]
        for r in self.rows:
            train = "-" if r.training_ms == 0.0 else f"{r.training_ms:.2f}"
            lines.append(f"{r.solver:<14s} {train:>14s} {r.per_signal_ms:>17.3f}")
        return "\n".join(lines)


def timing_report(cfg: ExperimentConfig, n_signals: int = 10, repeats: int = 3) -> TimingTable:
    """Mean per-signal wall-clock of each solver on the first signals of the sweep.

    Each signal is timed ``repeats`` times and the fastest run is kept.
    None of the solvers here has an offline training phase.
    """
    mats = _draw_matrices(replace(cfg, n_matrices=1))
    A, g0 = mats[0]
    probs = [_instance(cfg, A, 0, j) for j in range(n_signals)]
    rows = []
    for name in cfg.solvers:
        per = []
        for prob in probs:
            per.append(min(_run_one(cfg, name, prob, g0, False, None).seconds
                           for _ in range(repeats)))
        rows.append(TimingRow(name, 1e3 * float(np.mean(per))))
    return TimingTable(rows)


# -- straight-through bias --------------------------------------------------

def ste_bias_stats(cfg: ExperimentConfig, name: str = "hgd_as_ista", n_signals: int = 5) -> dict:
    """How far hard-forward hypergradients are from soft-forward ones.

    Along HGD runs, each iteration's hypergradients (computed from the rounded
    forward, as the solver does) are compared with those of a fully soft step
    from the same point and parameters.  Returns per-parameter median and max
    relative discrepancy.
    """
    hcfg = cfg.hgd_config(name)
    fista = hcfg.variant == "fista"
    A, g0 = _draw_matrices(replace(cfg, n_matrices=1))[0]
    ids = ["gamma", "beta_r1", "beta_x1"] + (["beta_z1"] if fista else [])
    cols = {"gamma": 0, "beta_r1": 1, "beta_x1": 3, "beta_z1": 5}
    rel = {k: [] for k in ids}
    step = as_fista_step if fista else as_ista_step
    for j in range(n_signals):
        prob = _instance(cfg, A, 0, j)
        _, tr = run_hgd(prob, replace(hcfg, init_params=StructuralParams.canonical(g0, fista)))
        state = SolverState.initial(np.zeros(prob.N), fista)
        for t in range(tr.T):
            params = StructuralParams(
                beta_r=tuple(tr.beta[t, 0]), beta_x=tuple(tr.beta[t, 1]), gamma=float(tr.gamma[t]),
                beta_z=tuple(tr.beta[t, 2]) if fista else None)
            w = step_weights(params)
            hard = step(state, params, prob, mode="hard", weights=w)
            soft = step(state, params, prob, mode="soft", p=hcfg.p, weights=w)
            gh = hypergradients(hard, params, prob, hcfg.p).as_array()
            gs = hypergradients(soft, params, prob, hcfg.p).as_array()
            for k in ids:
                c = cols[k]
                rel[k].append(abs(gh[c] - gs[c]) / max(abs(gs[c]), 1e-300))
            state = hard.advance()
    return {k: {"median": float(np.median(v)), "max": float(np.max(v))} for k, v in rel.items()}
