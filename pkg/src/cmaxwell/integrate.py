"""Time stepping of the canonical field system and run monitoring."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from cmaxwell import defaults as dflt
from cmaxwell import maxwell_field as mf
from cmaxwell.errors import CFLViolation, NonFiniteState
from cmaxwell.geometry import SpacetimeMetric

DEFAULT_CFL = dflt.CFL


@dataclass
class GaugePolicy:
    """Choice of the free multiplier ``lambda = dA_0/dt``.

    ``lambda_zero`` freezes ``A_0``; ``prescribed`` evaluates
    ``prescribed_lambda(t)`` (scalar or grid array).
    """

    mode: str = "lambda_zero"
    prescribed_lambda: Optional[Callable] = None

    def __post_init__(self):
        if self.mode not in ("lambda_zero", "prescribed"):
            raise ValueError(f"unknown gauge mode {self.mode!r}")
        if self.mode == "prescribed" and self.prescribed_lambda is None:
            raise ValueError("prescribed gauge needs prescribed_lambda")

    def __call__(self, t):
        if self.mode == "lambda_zero":
            return 0.0
        return self.prescribed_lambda(t)


def max_stable_dt(state: mf.FieldState, metric: SpacetimeMetric, cfl: float = DEFAULT_CFL) -> float:
    """``cfl * min_i dx_i / v_i`` with the coordinate light speed ``v_i = c sqrt(g00/|g_ii|)``."""
    g = metric.diag
    bound = np.inf
    for i in range(3):
        v = state.c * np.sqrt(np.max(np.asarray(g[0]) / np.abs(np.asarray(g[i + 1]))))
        bound = min(bound, state.grid.dx[i] / v)
    return cfl * bound


def _check_dt(state, metric, dt, cfl):
    limit = max_stable_dt(state, metric, cfl)
    if not np.isfinite(dt) or dt == 0.0 or abs(dt) > limit * (1.0 + 1e-12):
        raise CFLViolation(f"|dt| = {abs(dt):.6g} exceeds the stability bound {limit:.6g} (CFL {cfl})")


def _finite_or_raise(state):
    if not state.is_finite():
        raise NonFiniteState(f"non-finite field values at t = {state.time}")
    return state


def leapfrog_step(state: mf.FieldState, metric: SpacetimeMetric, source: Optional[mf.CurrentSource] = None,
                  gauge: Optional[GaugePolicy] = None, dt: float = 0.0, cfl: float = DEFAULT_CFL) -> mf.FieldState:
    """Kick-drift-kick step.

    ``p^i`` gets two half kicks from ``-dH/dA_i`` at the step ends; ``A_i``
    drifts with the midpoint momenta; ``p^0`` and ``A_0`` are advanced with
    midpoint rates. Negative ``dt`` runs the map backwards.
    """
    source = source or mf.CurrentSource.vacuum()
    gauge = gauge or GaugePolicy()
    _check_dt(state, metric, dt, cfl)
    t0 = state.time
    half = 0.5 * dt
    grid = state.grid

    pi_half = state.pi + half * mf.pi_rate(state, metric, source, t0)
    lam = gauge(t0 + half)
    A0_new = state.A0 + dt * np.broadcast_to(np.asarray(lam, dtype=float), grid.shape)
    mid = mf.FieldState(grid, 0.5 * (state.A0 + A0_new) if gauge.mode != "lambda_zero" else state.A0,
                        state.Ai, state.p0, pi_half, t0 + half, state.c)
    Ai_new = state.Ai + dt * mf.velocities_from_momenta(mid, metric)
    p0_new = state.p0 + dt * mf.p0_rate(mid, metric, source, t0 + half)

    new = mf.FieldState(grid, A0_new, Ai_new, p0_new, pi_half, t0 + dt, state.c)
    new.pi = pi_half + half * mf.pi_rate(new, metric, source, t0 + dt)
    return _finite_or_raise(new)


def _axpy(state: mf.FieldState, d: mf.Derivatives, h: float, t: float) -> mf.FieldState:
    return mf.FieldState(state.grid, state.A0 + h * d.A0_dot, state.Ai + h * d.Ai_dot, state.p0 + h * d.p0_dot,
                         state.pi + h * d.pi_dot, t, state.c)


def rk4_step(state: mf.FieldState, metric: SpacetimeMetric, source: Optional[mf.CurrentSource] = None,
             gauge: Optional[GaugePolicy] = None, dt: float = 0.0, cfl: float = DEFAULT_CFL) -> mf.FieldState:
    """Classical fourth-order Runge-Kutta over the full right-hand side."""
    source = source or mf.CurrentSource.vacuum()
    gauge = gauge or GaugePolicy()
    _check_dt(state, metric, dt, cfl)
    t0 = state.time

    def f(s):
        return mf.rhs(s, metric, source, gauge(s.time))

    k1 = f(state)
    k2 = f(_axpy(state, k1, 0.5 * dt, t0 + 0.5 * dt))
    k3 = f(_axpy(state, k2, 0.5 * dt, t0 + 0.5 * dt))
    k4 = f(_axpy(state, k3, dt, t0 + dt))
    w = dt / 6.0
    new = mf.FieldState(
        state.grid,
        state.A0 + w * (k1.A0_dot + 2 * k2.A0_dot + 2 * k3.A0_dot + k4.A0_dot),
        state.Ai + w * (k1.Ai_dot + 2 * k2.Ai_dot + 2 * k3.Ai_dot + k4.Ai_dot),
        state.p0 + w * (k1.p0_dot + 2 * k2.p0_dot + 2 * k3.p0_dot + k4.p0_dot),
        state.pi + w * (k1.pi_dot + 2 * k2.pi_dot + 2 * k3.pi_dot + k4.pi_dot),
        t0 + dt, state.c)
    return _finite_or_raise(new)


STEPPERS = {"leapfrog": leapfrog_step, "rk4": rk4_step}


# monitoring --------------------------------------------------------------------

MONITOR_COLUMNS = ("step", "time", "hamiltonian", "p0_max", "p_max", "gauss_max", "ampere_max")


@dataclass
class MonitorRecord:
    step: int
    time: float
    hamiltonian: float
    p0_max: float
    p_max: float
    gauss_max: float
    ampere_max: Optional[float] = None


@dataclass
class MonitorLog:
    records: list = field(default_factory=list)

    def append(self, rec: MonitorRecord):
        if len(self.records) >= 2:
            direction = np.sign(self.records[1].time - self.records[0].time)
            if np.sign(rec.time - self.records[-1].time) != direction:
                raise ValueError("monitor time column must be monotone")
        values = [rec.time, rec.hamiltonian, rec.p0_max, rec.p_max, rec.gauss_max]
        if rec.ampere_max is not None:
            values.append(rec.ampere_max)
        if not all(math.isfinite(v) for v in values):
            raise NonFiniteState(f"non-finite monitor values at step {rec.step}")
        self.records.append(rec)

    def __len__(self):
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([np.nan if getattr(r, name) is None else getattr(r, name) for r in self.records])

    def to_csv(self, path) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(MONITOR_COLUMNS)
            for r in self.records:
                w.writerow([r.step] + [_fmt(getattr(r, c)) for c in MONITOR_COLUMNS[1:]])
        return path

    @classmethod
    def from_csv(cls, path) -> "MonitorLog":
        log = cls()
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                log.records.append(MonitorRecord(
                    int(row["step"]), float(row["time"]), float(row["hamiltonian"]), float(row["p0_max"]),
                    float(row["p_max"]), float(row["gauss_max"]),
                    float(row["ampere_max"]) if row["ampere_max"] else None))
        return log


def _fmt(v):
    return "" if v is None else repr(float(v))


def _monitor(step, state, metric, source, gauge, amp):
    return MonitorRecord(
        step=step,
        time=state.time,
        hamiltonian=mf.hamiltonian_total(state, metric, source, gauge(state.time)),
        p0_max=float(np.max(np.abs(state.p0))),
        p_max=float(np.max(np.abs(state.pi))),
        gauss_max=float(np.max(np.abs(mf.gauss_residual(state, metric, source)))),
        ampere_max=amp,
    )


@dataclass
class RunResult:
    log: MonitorLog
    final_state: mf.FieldState
    snapshots: list
    dt: float
    steps: int
    final_ampere_residual: Optional[np.ndarray] = None


def run(state: mf.FieldState, metric: SpacetimeMetric, source: Optional[mf.CurrentSource] = None,
        gauge: Optional[GaugePolicy] = None, dt: float = 0.0, steps: int = 0, integrator: str = "leapfrog",
        cadence: int = 1, cfl: float = DEFAULT_CFL, snapshot_every: int = 0, out_dir=None,
        lookahead: bool = True, snapshot_meta: Optional[dict] = None) -> RunResult:
    """Advance ``steps`` steps, recording monitors every ``cadence`` steps.

    The Ampere residual at step ``n`` needs ``D`` at ``n-1`` and ``n+1``;
    it is left empty at step 0, and with ``lookahead`` one extra step past
    the end is taken (and discarded) so the final record carries it.
    Snapshots go to ``out_dir/snapshots`` every ``snapshot_every`` steps
    and at the end when ``snapshot_every > 0``.
    """
    source = source or mf.CurrentSource.vacuum()
    gauge = gauge or GaugePolicy()
    if integrator not in STEPPERS:
        raise ValueError(f"unknown integrator {integrator!r}")
    if cadence < 1:
        raise ValueError("cadence must be >= 1")
    step = STEPPERS[integrator]
    log = MonitorLog()
    snapshots = []
    snap_dir = None
    if snapshot_every and out_dir is not None:
        snap_dir = Path(out_dir) / "snapshots"
        snap_dir.mkdir(parents=True, exist_ok=True)

    cur = state.copy()
    D_prev = None
    final_amp = None
    for n in range(steps + 1):
        recording = n % cadence == 0 or n == steps
        need_next = n < steps or (lookahead and recording and steps > 0)
        nxt = step(cur, metric, source, gauge, dt, cfl) if need_next else None
        D_cur, H_cur = mf.displacement_and_magnetic(cur, metric)
        if recording:
            amp = None
            if D_prev is not None and nxt is not None:
                D_next, _ = mf.displacement_and_magnetic(nxt, metric)
                res = mf.ampere_residual(cur, metric, source, mf.displacement_rate(D_prev, D_next, dt), H_cur)
                amp = float(np.max(np.abs(res)))
                if n == steps:
                    final_amp = res
            log.append(_monitor(n, cur, metric, source, gauge, amp))
        if snap_dir is not None and (n % snapshot_every == 0 or n == steps):
            path = snap_dir / f"snap_{n:06d}.bin"
            mf.write_snapshot(path, cur, dict(snapshot_meta or {}, step=n))
            snapshots.append(path)
        if n == steps:
            break
        D_prev = D_cur
        cur = nxt
    return RunResult(log, cur, snapshots, dt, steps, final_amp)
