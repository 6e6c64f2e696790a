"""Parameter sweeps over the protocol, optionally with ensemble error bars."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import measures as ms
from .config import ANGLE_VARIABLE, RunConfig, SweepSpec, sweep_params
from .errors import PulsedOptoError
from .model import SystemParams
from .protocol import (
    adiabatic_blue,
    adiabatic_red,
    ensemble_params,
    evaluate,
    gain,
    summarize,
)

MEASURE_COLUMNS = ("S_db", "E_N", "nu_minus", "lambda_min")
ENSEMBLE_COLUMNS = ("mean_S_db", "std_S_db")

_EXPECTED = (PulsedOptoError, ValueError, ArithmeticError, np.linalg.LinAlgError)


@dataclass
class SweepRow:
    value: float
    S_db: float = math.nan
    E_N: float = math.nan
    nu_minus: float = math.nan
    lambda_min: float = math.nan
    mean_S_db: float = math.nan
    std_S_db: float = math.nan
    error: str = ""


@dataclass
class SweepTable:
    name: str
    swept_var: str
    scale: str = "linear"
    targets: tuple = ("S_db",)
    ensemble: bool = False
    rows: list = field(default_factory=list)

    @property
    def columns(self) -> list[str]:
        cols = ["swept_var", "value", *MEASURE_COLUMNS]
        if self.ensemble:
            cols += list(ENSEMBLE_COLUMNS)
        if self.has_errors:
            cols.append("error")
        return cols

    @property
    def has_errors(self) -> bool:
        return any(r.error for r in self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def records(self) -> list[dict]:
        out = []
        for r in self.rows:
            rec = {"swept_var": self.swept_var}
            for c in self.columns[1:]:
                rec[c] = getattr(r, c)
            out.append(rec)
        return out


def point_params(p: SystemParams, variable: str, value: float) -> SystemParams:
    """Parameters with the swept variable set to ``value``."""
    if variable == "Gamma":
        return p.replace(Gamma=value)
    if variable == "eta":
        return p.replace(eta_B=value, eta_R=value, eta_M=value)
    if variable == ANGLE_VARIABLE:
        return p
    return p.replace(**{variable: value})


def state_for(p: SystemParams, sweep: SweepSpec, frame: str, dt, log_base: float):
    """Detected two-mode CM (as an array) of the sweep's bipartition."""
    if sweep.model == "adiabatic":
        G = gain(p)
        V = adiabatic_blue(G, p.n0)
        if sweep.bipartition == "pm":
            return ms.apply_loss(V.matrix, [p.eta_B, p.eta_M])
        # same coupling and duration for the readout: T equals the blue gain
        return ms.apply_loss(adiabatic_red(G, V).matrix, [p.eta_B, p.eta_R])
    _, V = evaluate(p, sweep.bipartition, frame, dt, log_base)
    return V.matrix


def _measures_row(row: SweepRow, V, log_base, S_override=None):
    m = ms.compute_measures(V, base=log_base)
    row.S_db = m.s_db if S_override is None else S_override
    row.E_N, row.nu_minus, row.lambda_min = m.e_n, m.nu_minus, m.lambda_min


def _ensemble_values(p, sweep, frame, dt, log_base, fn):
    """Apply ``fn`` to the CM of every ensemble member; collect failures."""
    e = sweep.ensemble
    vals, errs = [], []
    for k, q in enumerate(ensemble_params(p, e.n, e.rel_width, e.seed)):
        try:
            vals.append(fn(state_for(q, sweep, frame, dt, log_base)))
        except _EXPECTED as exc:
            errs.append((k, f"{type(exc).__name__}: {exc}"))
    return summarize("S_db", vals, errs, e.n)


def _ensemble_note(stats) -> str:
    if not stats.errors:
        return ""
    k, msg = stats.errors[0]
    return f"ensemble: {len(stats.errors)}/{stats.count} samples failed (sample {k}: {msg})"


def evaluate_point(task) -> SweepRow:
    """Evaluate one sweep point; errors land in the row, never propagate."""
    cfg, sweep, value = task
    frame = sweep.frame or cfg.frame
    row = SweepRow(value=float(value))
    try:
        p = point_params(sweep_params(cfg, sweep), sweep.variable, value)
        V = state_for(p, sweep, frame, cfg.dt, cfg.log_base_value)
        _measures_row(row, V, cfg.log_base_value)
        if sweep.ensemble is not None:
            st = _ensemble_values(
                p, sweep, frame, cfg.dt, cfg.log_base_value, ms.two_mode_squeezing_db
            )
            row.mean_S_db, row.std_S_db = st.mean, st.std
            row.error = _ensemble_note(st)
    except _EXPECTED as exc:
        row.error = f"{type(exc).__name__}: {exc}"
    return row


def _angle_rows(cfg: RunConfig, sweep: SweepSpec) -> list[SweepRow]:
    """theta_B scans: one state, many detector settings."""
    thetas = sweep.values()
    frame = sweep.frame or cfg.frame
    p = sweep_params(cfg, sweep)
    try:
        V = state_for(p, sweep, frame, cfg.dt, cfg.log_base_value)
        var = ms.angle_scan(V, thetas, sweep.angle_mode)
    except _EXPECTED as exc:
        msg = f"{type(exc).__name__}: {exc}"
        return [SweepRow(value=t, error=msg) for t in thetas]
    rows = []
    for t, v in zip(thetas, var):
        row = SweepRow(value=t)
        _measures_row(row, V, cfg.log_base_value, S_override=ms.to_db(v))
        rows.append(row)
    if sweep.ensemble is not None:
        per_theta = [[] for _ in thetas]

        def scan(W):
            for j, v in enumerate(ms.angle_scan(W, thetas, sweep.angle_mode)):
                per_theta[j].append(ms.to_db(v))
            return 0.0

        st = _ensemble_values(p, sweep, frame, cfg.dt, cfg.log_base_value, scan)
        note = _ensemble_note(st)
        for row, vals in zip(rows, per_theta):
            s = summarize("S_db", vals, st.errors, st.count)
            row.mean_S_db, row.std_S_db, row.error = s.mean, s.std, note
    return rows


def default_jobs() -> int:
    return os.cpu_count() or 1


def run_sweep(cfg: RunConfig, sweep: SweepSpec, jobs: int | None = None) -> SweepTable:
    """Evaluate every point of ``sweep``; rows come back in sweep order."""
    table = SweepTable(
        name=sweep.name,
        swept_var=sweep.variable,
        scale=sweep.scale,
        targets=tuple(sweep.targets),
        ensemble=sweep.ensemble is not None,
    )
    if sweep.variable == ANGLE_VARIABLE:
        table.rows = _angle_rows(cfg, sweep)
        return table
    tasks = [(cfg, sweep, v) for v in sweep.values()]
    jobs = jobs or cfg.jobs or default_jobs()
    jobs = min(jobs, len(tasks))
    if jobs <= 1:
        table.rows = [evaluate_point(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            table.rows = list(pool.map(evaluate_point, tasks))
    return table


def run_all(cfg: RunConfig, jobs: int | None = None) -> list[SweepTable]:
    return [run_sweep(cfg, s, jobs) for s in cfg.sweeps]
