"""Physics and numerics defaults, in one place.

Every default the library or a scenario falls back on is listed here.
Run manifests echo the effective values, so nothing in a run depends on a
setting that is not recorded.

=============================  ===========  =====================================================
name                           value        meaning
=============================  ===========  =====================================================
CFL                            0.5          ``dt = CFL * min_i dx_i / v_i`` with the coordinate
                                            light speed ``v_i = c sqrt(g00 / |g_ii|)``
INTEGRATOR                     leapfrog     symplectic kick-drift-kick; ``rk4`` is the reference
GAUGE                          lambda_zero  multiplier of ``p0``; freezes ``A_0``
MONITOR_CADENCE                1            monitor record every step
SNAPSHOT_EVERY                 0            no snapshots unless asked for
UNITS                          desk         ``c = 1``; ``cgs`` uses ``c = 2.99792458e10 cm/s``
POLARIZATION_TOL               1e-12        ``|k.e| / |k|`` allowed for a plane wave
HESSIAN_RTOL                   1e-6         relative eigenvalue cut for the velocity Hessian rank
HESSIAN_ATOL                   1e-7         absolute eigenvalue floor (times ``max(1, |L|)``)
RANK_PROBE_RADIUS              1e-2         probe offsets for the constant-rank check
RANK_PROBE_POINTS              5            probes per axis of ``(q, qdot)``
CONSTRAINT_TOL                 1e-8         ``|phi|`` counted as on the constraint surface
BRACKET_RTOL                   1e-10        relative singular-value cut of ``[phi^a, phi^b]``
BRACKET_ATOL                   1e-7         absolute singular-value floor of the same matrix
CHAIN_TOL                      1e-6         a consistency function below this at every probe
                                            is not a new constraint
CHAIN_PROBES                   4            surface probes for secondary detection
CHAIN_PROBE_RADIUS             0.05         their relative spread
=============================  ===========  =====================================================
"""

CFL = 0.5
INTEGRATOR = "leapfrog"
GAUGE = "lambda_zero"
MONITOR_CADENCE = 1
SNAPSHOT_EVERY = 0
UNITS = "desk"
POLARIZATION_TOL = 1e-12

HESSIAN_RTOL = 1e-6
HESSIAN_ATOL = 1e-7
RANK_PROBE_RADIUS = 1e-2
RANK_PROBE_POINTS = 5
CONSTRAINT_TOL = 1e-8
BRACKET_RTOL = 1e-10
BRACKET_ATOL = 1e-7
CHAIN_TOL = 1e-6
CHAIN_PROBES = 4
CHAIN_PROBE_RADIUS = 0.05

# scenario-level fallbacks, echoed into manifests
SCENARIO = {
    "grid": {"length": [1.0, 1.0, 1.0]},
    "metric": {"family": "minkowski"},
    "source": {"kind": "none"},
    "integrator": {"scheme": INTEGRATOR, "cfl": CFL},
    "gauge": {"mode": GAUGE, "lambda": 0.0},
    "monitor": {"cadence": MONITOR_CADENCE, "snapshot_every": SNAPSHOT_EVERY},
    "units": {"system": UNITS},
}

METRIC_DEFAULTS = {
    "minkowski": {},
    "diagonal": {"g": [1.0, -1.0, -1.0, -1.0]},
    "stretch": {"scale": [1.0, 1.0, 1.0], "g00": 1.0},
    "sinusoidal": {"amplitude": [0.2, 0.2, 0.2], "g00": 1.0},
}

INITIAL_DEFAULTS = {
    "zero": {},
    "plane_wave": {"mode": [1, 0, 0], "amplitude": 1.0, "polarization": [0.0, 1.0, 0.0], "phase": 0.0},
    "gaussian_pulse": {"center": [0.5, 0.5, 0.5], "width": 0.25, "amplitude": 1.0,
                       "polarization": [1.0, 1.0, 0.0]},
    "manufactured_charge": {"center": [0.5, 0.5, 0.5], "width": 0.15, "amplitude": 1.0, "discrete": False},
}

SOURCE_DEFAULTS = {
    "none": {},
    "static_charge": {},
    "pulse_dipole": {"amplitude": 1.0, "center": [0.5, 0.5, 0.5], "width": 0.1, "direction": [0.0, 0.0, 1.0],
                     "duration": 2.0, "start": 0.0},
    "oscillating_dipole": {"amplitude": 1.0, "center": [0.5, 0.5, 0.5], "width": 0.1,
                           "direction": [0.0, 0.0, 1.0], "omega": 6.283185307179586},
}
