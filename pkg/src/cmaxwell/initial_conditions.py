"""Initial field states and prescribed current sources."""

from __future__ import annotations

import numpy as np
from scipy.integrate import quad

from cmaxwell import maxwell_field as mf
from cmaxwell.geometry import GridSpec, SpacetimeMetric, sinusoidal_scale_factors, sqrt_minus_g, sqrt_spatial_det


def wavevector(grid: GridSpec, mode) -> np.ndarray:
    """Periodic wavevector ``k_i = 2 pi m_i / L_i`` for integer mode numbers ``m``."""
    return np.array([2 * np.pi * m / L for m, L in zip(mode, grid.lengths)], dtype=float)


def _phase(grid, k, t=0.0, omega=0.0, phase=0.0):
    x = grid.coords()
    return k[0] * x[0] + k[1] * x[1] + k[2] * x[2] - omega * t + phase


def plane_wave_fields(grid: GridSpec, mode, amplitude, polarization, c, t=0.0, phase=0.0):
    """Analytic vacuum plane wave ``E = e E0 cos(k.x - w t)``, ``B = khat x E`` (flat space)."""
    k = wavevector(grid, mode)
    kn = np.linalg.norm(k)
    e = np.asarray(polarization, dtype=float)
    e = e / np.linalg.norm(e)
    arg = _phase(grid, k, t, c * kn, phase)
    E = amplitude * e[:, None, None, None] * np.cos(arg)
    b = np.cross(k / kn, e)
    B = amplitude * b[:, None, None, None] * np.cos(arg)
    return E, B


def plane_wave(grid: GridSpec, metric: SpacetimeMetric, mode=(1, 0, 0), amplitude=1.0,
               polarization=(0, 1, 0), c=mf.C_DESK, phase=0.0) -> mf.FieldState:
    """Canonical state of a plane wave with ``A_0 = 0``.

    ``A_i = -(c E0 / w) e_i sin(k.x)`` and ``Adot_i = c E0 e_i cos(k.x)``,
    turned into momenta by the momentum relation. In flat space this gives
    ``D = E`` and the analytic ``B`` up to the grid curl.
    """
    k = wavevector(grid, mode)
    kn = np.linalg.norm(k)
    if kn == 0:
        raise ValueError("plane wave needs a non-zero mode")
    e = np.asarray(polarization, dtype=float)
    e = e / np.linalg.norm(e)
    if abs(np.dot(k, e)) > 1e-12 * kn:
        raise ValueError("polarization must be perpendicular to k")
    omega = c * kn
    arg = _phase(grid, k, 0.0, 0.0, phase)
    Ai = np.stack([-(c * amplitude / omega) * e[i] * np.sin(arg) for i in range(3)])
    Ai = np.broadcast_to(Ai, (3,) + grid.shape).copy()
    Ai_dot = np.broadcast_to(np.stack([c * amplitude * e[i] * np.cos(arg) for i in range(3)]),
                             (3,) + grid.shape)
    state = mf.FieldState(grid, grid.zeros(), Ai, grid.zeros(), grid.zeros(3), 0.0, c)
    state.pi = mf.momenta_from_velocities(Ai_dot, state, metric)
    return state


def periodic_blob(grid: GridSpec, center=(0.5, 0.5, 0.5), width=0.1):
    """``exp(kappa sum_i (cos theta_i - 1))`` and its first/second derivatives.

    ``theta_i = 2 pi (x_i - center_i L_i) / L_i`` and
    ``kappa = (L / 2 pi w)^2`` per axis, so near the centre the blob is a
    Gaussian of standard deviation ``width * L``. Exactly periodic.
    """
    x = grid.coords()
    val = 1.0
    thetas, kappas, ks = [], [], []
    for i in range(3):
        L = grid.lengths[i]
        k = 2 * np.pi / L
        kappa = 1.0 / (k * width * L) ** 2
        th = k * (x[i] - center[i] * L)
        val = val * np.exp(kappa * (np.cos(th) - 1.0))
        thetas.append(th)
        kappas.append(kappa)
        ks.append(k)
    val = np.broadcast_to(val, grid.shape)
    d1 = [val * (-kappas[i] * ks[i] * np.sin(thetas[i])) for i in range(3)]
    d2 = [val * ((kappas[i] * ks[i] * np.sin(thetas[i])) ** 2 - kappas[i] * ks[i] ** 2 * np.cos(thetas[i]))
          for i in range(3)]
    return val, d1, d2


def gaussian_pulse(grid: GridSpec, metric: SpacetimeMetric, center=(0.5, 0.5, 0.5), width=0.1,
                   amplitude=1.0, polarization=(0, 0, 1), c=mf.C_DESK) -> mf.FieldState:
    """Potential blob ``A_i = amplitude e_i psi`` at rest: magnetic field only, ``D = 0``."""
    psi, _, _ = periodic_blob(grid, center, width)
    e = np.asarray(polarization, dtype=float)
    e = e / np.linalg.norm(e)
    Ai = np.stack([amplitude * e[i] * psi for i in range(3)])
    return mf.FieldState(grid, grid.zeros(), Ai, grid.zeros(), grid.zeros(3), 0.0, c)


def _scale_factors(grid: GridSpec, metric: SpacetimeMetric):
    if metric.family == "sinusoidal":
        return sinusoidal_scale_factors(grid, np.asarray(metric.params["amplitude"]))
    if not metric.is_constant:
        raise ValueError(f"no analytic derivatives for metric family {metric.family!r}")
    h = [np.sqrt(-metric.diag[i + 1]) for i in range(3)]
    return h, [0.0, 0.0, 0.0]


def manufactured_charge(grid: GridSpec, metric: SpacetimeMetric, center=(0.5, 0.5, 0.5), width=0.12,
                        amplitude=1.0, c=mf.C_DESK, discrete: bool = False):
    """Electrostatic blob: potential ``A_0 = phi``, ``D^i = g^ii g^00 d_i phi``.

    Returns ``(state, source)``. With ``discrete=False`` both ``D`` and
    ``rho = (1/4 pi sqrt(3g)) d_i(sqrt(3g) D^i)`` are analytic (needs a
    constant or sinusoidal metric), so the grid Gauss residual is pure
    truncation error. With ``discrete=True`` the grid gradient and grid
    divergence are used and the data satisfy the discrete Gauss law to
    round-off.
    """
    phi, dphi, d2phi = periodic_blob(grid, center, width)
    phi = amplitude * phi
    dphi = [amplitude * d for d in dphi]
    d2phi = [amplitude * d for d in d2phi]
    g = metric.diag
    s3 = sqrt_spatial_det(metric)
    if discrete:
        grad = mf.gradient(phi, grid)
        D = np.stack([grad[i] / (g[i + 1] * g[0]) for i in range(3)])
        rho = mf.divergence(s3 * D, grid) / (s3 * 4 * np.pi)
    else:
        h, dh = _scale_factors(grid, metric)
        if not metric.uniform_lapse:
            raise ValueError("analytic manufactured charge needs a uniform g00")
        g00 = float(np.asarray(g[0]).flat[0])
        D = np.stack([np.broadcast_to(-dphi[i] / (h[i] ** 2 * g00), grid.shape) for i in range(3)])
        # d_i(sqrt(3g) g^ii d_i phi) with sqrt(3g) g^ii = -prod(h)/h_i^2
        div = 0.0
        for i in range(3):
            others = h[(i + 1) % 3] * h[(i + 2) % 3]
            div = div - others * (d2phi[i] / h[i] - dh[i] * dphi[i] / h[i] ** 2)
        rho = np.broadcast_to(div / (g00 * h[0] * h[1] * h[2] * 4 * np.pi), grid.shape).copy()
    sg = sqrt_minus_g(metric)
    pi = np.broadcast_to(sg * D / (4 * np.pi * c * c), (3,) + grid.shape).copy()
    state = mf.FieldState(grid, np.array(phi), grid.zeros(3), grid.zeros(), pi, 0.0, c)
    rho = np.array(rho)
    source = mf.CurrentSource(lambda t: rho, lambda t: 0.0, True, lambda t: 0.0, "static_charge",
                              {"discrete": discrete})
    return state, source


def _bump(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = (u > 0) & (u < 1)
    ui = u[inside]
    out[inside] = np.exp(4.0 - 1.0 / (ui * (1.0 - ui)))
    return out


def dipole_current(grid: GridSpec, metric: SpacetimeMetric, kind="pulse", amplitude=1.0, center=(0.5, 0.5, 0.5),
                   width=0.1, direction=(0, 0, 1), duration=1.0, start=0.0, omega=2 * np.pi) -> mf.CurrentSource:
    """Localized current ``j^i = J0 e_i psi(x) s(t)`` with a grid-exact charge.

    ``kind='pulse'``: ``s`` is a smooth bump supported on
    ``[start, start + duration]`` (peak 1). ``kind='oscillating'``:
    ``s = sin(omega t)``. The charge ``rho(t) = -S(t) d_i(sqrt(3g) J^i) /
    sqrt(3g)`` with ``S = int_0^t s`` uses the grid divergence, so
    ``d_t(sqrt(3g) rho) + d_i(sqrt(3g) j^i) = 0`` holds on the grid exactly
    and ``rho(0) = 0``.
    """
    psi, _, _ = periodic_blob(grid, center, width)
    e = np.asarray(direction, dtype=float)
    e = e / np.linalg.norm(e)
    J = np.stack([amplitude * e[i] * psi for i in range(3)])
    s3 = sqrt_spatial_det(metric)
    divJ = mf.divergence(s3 * J, grid) / s3

    if kind == "pulse":
        def s(t):
            return float(_bump((t - start) / duration))

        def S(t):
            hi = min(max(t, start), start + duration)
            if hi <= start:
                return 0.0
            return quad(lambda tt: s(tt), start, hi, epsabs=1e-15, epsrel=1e-13, limit=200)[0]
    elif kind == "oscillating":
        def s(t):
            return float(np.sin(omega * t))

        def S(t):
            return float((1.0 - np.cos(omega * t)) / omega)
    else:
        raise ValueError(f"unknown dipole kind {kind!r}")

    params = {"kind": kind, "amplitude": amplitude, "center": list(center), "width": width,
              "direction": e.tolist(), "duration": duration, "start": start, "omega": omega}
    return mf.CurrentSource(
        rho=lambda t: -S(t) * divJ,
        ji=lambda t: s(t) * J,
        continuity_certified=True,
        rho_dot=lambda t: -s(t) * divJ,
        name=f"{kind}_dipole",
        params=params,
    )
