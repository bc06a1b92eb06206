"""Oracle comparisons, dispersion and convergence studies, constraint-chain checks.

The flat-space reference solver lives in :mod:`cmaxwell.oracle` and is
re-exported here; everything else in this module drives the canonical
solver and compares it against that oracle, analytic solutions, or the
hand-derived constraint structure of small systems.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import least_squares

from cmaxwell import dirac_bergmann as db
from cmaxwell import initial_conditions as ic
from cmaxwell import integrate as it
from cmaxwell import maxwell_field as mf
from cmaxwell.errors import FitFailure, GridMismatch
from cmaxwell.geometry import GridSpec, SpacetimeMetric
from cmaxwell.oracle import OracleTrajectory, curl, fdtd_oracle

__all__ = [
    "OracleTrajectory", "curl", "fdtd_oracle", "CanonicalTrajectory", "canonical_trajectory",
    "ErrorReport", "compare_to_oracle", "observed_orders", "fitted_order", "richardson_order",
    "measure_frequency", "DispersionPoint", "dispersion_study", "discrete_omega", "semi_discrete_omega",
    "ChainReport", "constraint_chain_check", "em_single_mode_system", "mixed_velocity_system",
    "oscillator_system", "mixed_velocity_trajectory_error", "quadratic_form",
]


# canonical runs in field variables ----------------------------------------------

@dataclass
class CanonicalTrajectory:
    """``D`` and ``H`` (shape ``(k, 3, nx, ny, nz)``) at ``times``."""

    times: np.ndarray
    D: np.ndarray
    H: np.ndarray
    grid: GridSpec


def canonical_trajectory(state: mf.FieldState, metric: SpacetimeMetric, dt: float, steps: int,
                         source: Optional[mf.CurrentSource] = None, gauge: Optional[it.GaugePolicy] = None,
                         integrator: str = "leapfrog", record_every: int = 1,
                         cfl: float = it.DEFAULT_CFL) -> CanonicalTrajectory:
    """Run the canonical stepper and map every record through the field tensor."""
    step = it.STEPPERS[integrator]

    def fields(s):
        return mf.extract_DH(mf.field_tensor(s, metric))

    cur = state.copy()
    D, H = fields(cur)
    times, Ds, Hs = [cur.time], [D], [H]
    for n in range(1, steps + 1):
        cur = step(cur, metric, source, gauge, dt, cfl)
        if n % record_every == 0 or n == steps:
            D, H = fields(cur)
            times.append(cur.time)
            Ds.append(D)
            Hs.append(H)
    return CanonicalTrajectory(np.array(times), np.array(Ds), np.array(Hs), state.grid)


@dataclass
class ErrorReport:
    """Per-record discrepancies between a canonical run and the oracle."""

    times: np.ndarray
    sup_E: np.ndarray
    sup_B: np.ndarray
    l2_E: np.ndarray
    l2_B: np.ndarray

    @property
    def sup(self) -> float:
        """Largest sup-norm discrepancy of either field over the horizon."""
        return float(max(np.max(self.sup_E), np.max(self.sup_B)))

    @property
    def l2(self) -> float:
        return float(max(np.max(self.l2_E), np.max(self.l2_B)))


def compare_to_oracle(canonical: CanonicalTrajectory, oracle: OracleTrajectory) -> ErrorReport:
    """Sup and (volume-weighted) L2 discrepancies of ``D - E`` and ``H - B`` per record."""
    if canonical.grid != oracle.grid or canonical.D.shape != oracle.E.shape:
        raise GridMismatch(f"grids differ: {canonical.grid} vs {oracle.grid}")
    if canonical.times.shape != oracle.times.shape or not np.allclose(canonical.times, oracle.times,
                                                                      rtol=1e-12, atol=1e-14):
        raise GridMismatch("record times differ")
    dv = canonical.grid.cell_volume
    axes = tuple(range(1, canonical.D.ndim))
    dE = canonical.D - oracle.E
    dB = canonical.H - oracle.B
    return ErrorReport(
        canonical.times,
        np.max(np.abs(dE), axis=axes),
        np.max(np.abs(dB), axis=axes),
        np.sqrt(np.sum(dE ** 2, axis=axes) * dv),
        np.sqrt(np.sum(dB ** 2, axis=axes) * dv),
    )


# convergence ---------------------------------------------------------------------

def observed_orders(errors: Sequence[float], spacings: Sequence[float]) -> np.ndarray:
    """Pairwise orders ``log(e_i / e_{i+1}) / log(h_i / h_{i+1})``."""
    e = np.asarray(errors, dtype=float)
    h = np.asarray(spacings, dtype=float)
    return np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:])


def fitted_order(errors: Sequence[float], spacings: Sequence[float]) -> float:
    """Least-squares slope of ``log e`` against ``log h``."""
    return float(np.polyfit(np.log(spacings), np.log(errors), 1)[0])


def richardson_order(coarse: float, medium: float, fine: float, ratio: float = 2.0) -> float:
    """Observed order from three solutions on a ladder refined by ``ratio``."""
    return float(np.log(abs((coarse - medium) / (medium - fine))) / np.log(ratio))


# dispersion -------------------------------------------------------------------------

def semi_discrete_omega(k: float, dx: float, c: float = 1.0) -> float:
    """Frequency of the central-difference semi-discretization, ``c sin(k dx)/dx``."""
    return c * np.sin(k * dx) / dx


def discrete_omega(k: float, dx: float, dt: float, c: float = 1.0) -> float:
    """Leapfrog frequency ``(2/dt) asin(dt Omega / 2)`` with ``Omega`` the semi-discrete one."""
    return 2.0 / dt * np.arcsin(0.5 * dt * semi_discrete_omega(k, dx, c))


def measure_frequency(times, signal, omega_guess: float, min_periods: float = 8.0) -> float:
    """Least-squares fit of ``a cos(w t) + b sin(w t) + d`` to a probe series.

    Raises ``FitFailure`` when the series spans fewer than ``min_periods``
    periods of ``omega_guess`` or the fit does not converge cleanly.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(signal, dtype=float)
    span = t[-1] - t[0]
    if omega_guess <= 0 or span * omega_guess / (2 * np.pi) < min_periods:
        raise FitFailure(f"series covers {span * omega_guess / (2 * np.pi):.2f} periods, need {min_periods}")
    scale = np.max(np.abs(y))
    if scale == 0:
        raise FitFailure("probe signal is identically zero")

    def resid(x):
        a, b, d, w = x
        return (a * np.cos(w * t) + b * np.sin(w * t) + d - y) / scale

    x0 = [y[0], 0.0, 0.0, omega_guess]
    sol = least_squares(resid, x0, xtol=1e-15, ftol=1e-15, gtol=1e-15, method="lm")
    rms = np.sqrt(np.mean(sol.fun ** 2))
    if not sol.success or rms > 1e-3:
        raise FitFailure(f"frequency fit did not converge (rms residual {rms:.2e})")
    return float(abs(sol.x[3]))


@dataclass
class DispersionPoint:
    mode: int
    cells_per_wavelength: float
    dx: float
    dt: float
    omega_measured: float
    omega_exact: float
    omega_semi_discrete: float
    omega_discrete: float

    @property
    def rel_error(self) -> float:
        """``|w / (c|k|) - 1|``."""
        return abs(self.omega_measured / self.omega_exact - 1.0)

    @property
    def rel_error_discrete(self) -> float:
        return abs(self.omega_measured / self.omega_discrete - 1.0)


def dispersion_study(modes: Sequence[int] = (1,), cells_per_wavelength: float = 16, cfl: float = 0.5,
                     periods: float = 10.0, c: float = 1.0, length: float = 1.0) -> list[DispersionPoint]:
    """Measure the frequency of axis-aligned vacuum plane waves.

    Each mode ``m`` runs on an ``(m * cells_per_wavelength, 4, 4)`` grid for
    ``periods`` periods; ``D_y`` at the origin is fitted for ``w``.
    """
    m_flat = SpacetimeMetric.minkowski()
    out = []
    for m in modes:
        n = int(round(m * cells_per_wavelength))
        dx = length / n
        grid = GridSpec((n, 4, 4), (dx, dx, dx))
        state = ic.plane_wave(grid, m_flat, (m, 0, 0), 1.0, (0, 1, 0), c)
        k = 2 * np.pi * m / length
        dt = cfl * dx / c
        steps = int(np.ceil(periods * 2 * np.pi / (c * k) / dt))
        series = np.empty(steps + 1)
        times = dt * np.arange(steps + 1)
        cur = state
        for n_ in range(steps + 1):
            series[n_] = cur.pi[1, 0, 0, 0]
            if n_ < steps:
                cur = it.leapfrog_step(cur, m_flat, dt=dt, cfl=cfl)
        w_disc = discrete_omega(k, dx, dt, c)
        w = measure_frequency(times, series, w_disc)
        out.append(DispersionPoint(m, n / m, dx, dt, w, c * k, semi_discrete_omega(k, dx, c), w_disc))
    return out


# constraint chains ---------------------------------------------------------------------

def mixed_velocity_system() -> db.LagrangianSystem:
    """``L = q1dot q2 - (q1^2 + q2^2)/2``: two second-class primaries."""
    return db.LagrangianSystem(2, lambda t, q, v: v[0] * q[1] - 0.5 * (q[0] ** 2 + q[1] ** 2), "mixed_velocity")


def oscillator_system() -> db.LagrangianSystem:
    """Regular two-dimensional oscillator; no constraints."""
    return db.LagrangianSystem(2, lambda t, q, v: 0.5 * (v @ v) - 0.5 * (q @ q), "oscillator")


def quadratic_form(f, dim: int):
    """``(M, b, c)`` with ``f(z) = z.M.z/2 + b.z + c`` for a quadratic ``f``.

    Recovered exactly (up to round-off) from ``f`` at ``0``, ``+-e_i`` and
    ``e_i + e_j``.
    """
    e = np.eye(dim)
    c0 = f(np.zeros(dim))
    plus = np.array([f(e[i]) for i in range(dim)])
    minus = np.array([f(-e[i]) for i in range(dim)])
    b = 0.5 * (plus - minus)
    M = np.diag(plus + minus - 2 * c0)
    for i in range(dim):
        for j in range(i + 1, dim):
            M[i, j] = M[j, i] = f(e[i] + e[j]) - plus[i] - plus[j] + c0
    return M, b, c0


def em_single_mode_system(n: int = 8, mode: int = 1, rho_hat: float = 0.3, c: float = 1.0,
                          length: float = 1.0):
    """Single Fourier mode of the field Lagrangian on an ``(n, 4, 4)`` grid.

    ``q = (a0, a1, a2, a3)`` with ``A_0 = a0 cos kx``, ``A_1 = a1 sin kx``,
    ``A_2 = a2 cos kx``, ``A_3 = a3 cos kx`` and a static charge
    ``rho = rho_hat cos kx``. The reduced Lagrangian is the grid average of
    the field Lagrangian density; since that is quadratic in ``(q, qdot)``
    it is sampled once and stored as its exact quadratic form. Returns ``(system, gauss)`` where
    ``gauss(t, q, p) = c k_h p1 - rho_hat / (2c)`` is the hand-derived
    Gauss expression of the mode, ``k_h = sin(k dx)/dx``.
    """
    dx = length / n
    grid = GridSpec((n, 4, 4), (dx, dx, dx))
    metric = SpacetimeMetric.minkowski()
    k = 2 * np.pi * mode / length
    x = grid.coords()[0]
    cos = np.broadcast_to(np.cos(k * x), grid.shape)
    sin = np.broadcast_to(np.sin(k * x), grid.shape)
    profiles = (sin, cos, cos)
    rho = rho_hat * cos
    source = mf.CurrentSource(lambda t: rho, lambda t: 0.0, True, lambda t: 0.0, "mode_charge")

    def field_lagrangian(z):
        q, v = z[:4], z[4:]
        Ai = np.stack([q[i + 1] * profiles[i] for i in range(3)])
        Ai_dot = np.stack([v[i + 1] * profiles[i] for i in range(3)])
        state = mf.FieldState(grid, q[0] * cos, Ai, grid.zeros(), grid.zeros(3), 0.0, c)
        return float(np.mean(mf.em_lagrangian_density(state, metric, source, Ai_dot)))

    M, b, L0 = quadratic_form(field_lagrangian, 8)

    def lagrangian(t, q, v):
        z = np.concatenate([q, v])
        return float(0.5 * z @ M @ z + b @ z + L0)

    k_h = np.sin(k * dx) / dx

    def gauss(t, q, p):
        return float(c * k_h * p[1] - rho_hat / (2 * c))

    return db.LagrangianSystem(4, lagrangian, "em_single_mode"), gauss


@dataclass
class ChainReport:
    """Outcome of running the constraint algorithm on a test system."""

    case: str
    n_primary: int
    n_secondary: int
    arbitrary: list
    second_class: bool
    matches: bool
    expected: str
    details: dict = field(default_factory=dict)


def constraint_chain_check(case: str = "em_single_mode", seed: int = 0) -> ChainReport:
    """Run the Legendre transform and the consistency chain on a named case.

    Cases and their hand-derived chains:

    ``em_single_mode``
        one primary (``p0``), one secondary proportional to the mode's
        Gauss expression, the multiplier left arbitrary.
    ``mixed_velocity``
        two primaries ``p1 - q2``, ``p2`` with ``[phi1, phi2] = -1``
        (second class), both multipliers fixed, no secondary.
    ``oscillator``
        regular; no constraints at all.
    """
    rng = np.random.default_rng(seed)
    details = {}
    if case == "em_single_mode":
        sys, gauss = em_single_mode_system()
        q = rng.normal(size=4)
        v = rng.normal(size=4)
        expected = "{p0 primary; Gauss secondary; lambda arbitrary}"
    elif case == "mixed_velocity":
        sys = mixed_velocity_system()
        q = rng.normal(size=2)
        v = rng.normal(size=2)
        expected = "{two second-class primaries; lambda fixed}"
    elif case == "oscillator":
        sys = oscillator_system()
        q = rng.normal(size=2)
        v = rng.normal(size=2)
        expected = "{}"
    else:
        raise ValueError(f"unknown case {case!r}")

    ch = db.legendre_transform(sys, 0.0, q, v)
    p = sys.momenta(0.0, q, v)
    n_primary = len(ch.constraints)
    final, res = db.constraint_chain(ch, 0.0, q, p)
    kinds = final.constraints.kinds()
    n_secondary = kinds.count("secondary")
    arbitrary = [bool(a) for a in res.arbitrary]
    C = res.bracket_matrix
    second_class = bool(C.size) and bool(np.linalg.matrix_rank(C, tol=1e-6) == C.shape[0])

    if case == "em_single_mode":
        # primary must be p0 up to sign; secondary proportional to gauss
        pts = [(rng.normal(size=4), rng.normal(size=4)) for _ in range(5)]
        phi = final.constraints[0]
        prim_err = max(abs(abs(phi(0.0, qq, pp)) - abs(pp[0])) for qq, pp in pts)
        sec = [c for c in final.constraints if c.kind == "secondary"]
        ratio_spread = np.inf
        if sec:
            ratios = [sec[0](0.0, qq, pp) / gauss(0.0, qq, pp) for qq, pp in pts]
            ratio_spread = float(np.ptp(ratios) / max(abs(np.mean(ratios)), 1e-300))
            details["secondary_over_gauss"] = float(np.mean(ratios))
        details.update(primary_error=float(prim_err), ratio_spread=ratio_spread)
        matches = (n_primary == 1 and n_secondary == 1 and prim_err < 1e-6 and ratio_spread < 1e-6
                   and all(arbitrary) and len(arbitrary) == 2)
    elif case == "mixed_velocity":
        details["bracket"] = C.tolist()
        matches = (n_primary == 2 and n_secondary == 0 and not any(arbitrary) and second_class
                   and abs(abs(C[0, 1]) - 1.0) < 1e-6)
    else:
        matches = n_primary == 0 and n_secondary == 0
    return ChainReport(case, n_primary, n_secondary, arbitrary, second_class, bool(matches), expected, details)


def mixed_velocity_trajectory_error(q0=(0.3, -0.7), duration: float = 1.0, samples: int = 51) -> float:
    """Sup-norm gap between the constrained flow and the Euler-Lagrange solution.

    The Euler-Lagrange equations of ``mixed_velocity_system`` reduce to
    ``q1dot = q2``, ``q2dot = -q1``, a rigid rotation, which serves as the
    oracle.
    """
    sys = mixed_velocity_system()
    q0 = np.asarray(q0, dtype=float)
    v0 = np.array([q0[1], -q0[0]])
    ch = db.legendre_transform(sys, 0.0, q0, v0).with_resolved_multipliers()
    p0 = sys.momenta(0.0, q0, v0)
    t_eval = np.linspace(0.0, duration, samples)
    t, q, _ = db.integrate_constrained(ch, (0.0, duration), q0, p0, t_eval)
    exact = np.stack([q0[0] * np.cos(t) + q0[1] * np.sin(t), -q0[0] * np.sin(t) + q0[1] * np.cos(t)], axis=1)
    return float(np.max(np.abs(q - exact)))
