"""Flat-space E/B reference solver.

A standard collocated update of the Gaussian-units curl equations

    dE/dt =  c curl B - 4 pi j,
    dB/dt = -c curl E,

advanced with a half step of ``B``, a full step of ``E`` and another half
step of ``B``. It works on fields rather than potentials and deliberately
shares no code with the canonical evolution: it has its own difference
operator and its own stability check.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from cmaxwell.errors import CFLViolation
from cmaxwell.geometry import GridSpec


def _d(f, axis, h):
    return (np.roll(f, -1, axis=axis - 3) - np.roll(f, 1, axis=axis - 3)) / (2.0 * h)


def curl(V: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Collocated central-difference curl of a ``(3, nx, ny, nz)`` field."""
    h = grid.dx
    return np.stack([
        _d(V[2], 1, h[1]) - _d(V[1], 2, h[2]),
        _d(V[0], 2, h[2]) - _d(V[2], 0, h[0]),
        _d(V[1], 0, h[0]) - _d(V[0], 1, h[1]),
    ])


@dataclass
class OracleTrajectory:
    """Recorded ``E``, ``B`` (shape ``(k, 3, nx, ny, nz)``) at ``times``."""

    times: np.ndarray
    E: np.ndarray
    B: np.ndarray
    grid: GridSpec


def fdtd_oracle(E0, B0, grid: GridSpec, dt: float, steps: int, current: Optional[Callable] = None,
                c: float = 1.0, t0: float = 0.0, record_every: int = 1, cfl: float = 0.5) -> OracleTrajectory:
    """Evolve ``(E0, B0)`` for ``steps`` steps in flat space.

    ``current(t)`` returns ``j`` (shape ``(3, nx, ny, nz)``) or ``None`` for
    vacuum. Records the initial fields, every ``record_every`` steps and the
    final fields.
    """
    limit = cfl * grid.min_dx / c
    if not np.isfinite(dt) or dt == 0.0 or abs(dt) > limit * (1.0 + 1e-12):
        raise CFLViolation(f"oracle |dt| = {abs(dt):.6g} exceeds {limit:.6g}")
    E = np.array(E0, dtype=float)
    B = np.array(B0, dtype=float)
    if E.shape != (3,) + grid.shape or B.shape != E.shape:
        raise ValueError("E0 and B0 must have shape (3,) + grid.shape")
    times, Es, Bs = [t0], [E.copy()], [B.copy()]
    t = t0
    for n in range(1, steps + 1):
        B = B - 0.5 * c * dt * curl(E, grid)
        E = E + c * dt * curl(B, grid)
        if current is not None:
            E = E - 4.0 * np.pi * dt * np.asarray(current(t + 0.5 * dt))
        B = B - 0.5 * c * dt * curl(E, grid)
        t = t0 + n * dt
        if n % record_every == 0 or n == steps:
            times.append(t)
            Es.append(E.copy())
            Bs.append(B.copy())
    return OracleTrajectory(np.array(times), np.array(Es), np.array(Bs), grid)
