"""Canonical electromagnetic field on a static diagonal metric.

Canonical pairs are ``(A_0, p^0)`` and ``(A_i, p^i)``. ``A_alpha`` is the
covariant potential and ``p^i`` the density-weighted momentum

    p^i = (sqrt(-g) / 4 pi c^2) F^{i0},

so that ``p^i_{,i}`` is a plain divergence. Wherever a lower index is
needed the momentum is lowered as the ``(i, 0)`` pair of the field tensor,
``p_i = g_00 g_ii p^i``, which makes ``p_i = (sqrt(-g) / 4 pi c^2) F_{i0}``
and ``Adot_i = -(4 pi c^3 / sqrt(-g)) p_i + c A_{0,i}`` hold literally.

Field tensor: ``F_{ab} = A_{b,a} - A_{a,b}`` with ``x^0 = c t``. The
contravariant tensor is read as ``D^i = F^{i0}`` and
``H_i = -1/2 eps_{ijk} F^{jk}``.

Units are Gaussian with explicit ``c`` (``FieldState.c``). Spatial
derivatives are second-order central differences on a periodic collocated
grid.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from cmaxwell.geometry import GridSpec, SpacetimeMetric, raise_antisym, sqrt_minus_g, sqrt_spatial_det

C_CGS = 2.99792458e10  # cm / s
C_DESK = 1.0

FOUR_PI = 4.0 * np.pi


def ddx(f: np.ndarray, axis: int, dx: float) -> np.ndarray:
    """Central difference along spatial ``axis`` (0, 1, 2) of the last three dims."""
    f = np.asarray(f, dtype=float)
    ax = f.ndim - 3 + axis
    out = np.empty_like(f)

    def sl(a, b):
        idx = [slice(None)] * f.ndim
        idx[ax] = slice(a, b)
        return tuple(idx)

    np.subtract(f[sl(2, None)], f[sl(None, -2)], out=out[sl(1, -1)])
    np.subtract(f[sl(0, 1)], f[sl(-2, -1)], out=out[sl(-1, None)])
    np.subtract(f[sl(1, 2)], f[sl(-1, None)], out=out[sl(0, 1)])
    out *= 1.0 / (2.0 * dx)
    return out


def divergence(v: np.ndarray, grid: GridSpec) -> np.ndarray:
    return ddx(v[0], 0, grid.dx[0]) + ddx(v[1], 1, grid.dx[1]) + ddx(v[2], 2, grid.dx[2])


def gradient(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    return np.stack([ddx(f, i, grid.dx[i]) for i in range(3)])


@dataclass
class FieldState:
    grid: GridSpec
    A0: np.ndarray
    Ai: np.ndarray
    p0: np.ndarray
    pi: np.ndarray
    time: float = 0.0
    c: float = C_DESK

    def __post_init__(self):
        shape = self.grid.shape
        self.A0 = np.asarray(self.A0, dtype=float)
        self.Ai = np.asarray(self.Ai, dtype=float)
        self.p0 = np.asarray(self.p0, dtype=float)
        self.pi = np.asarray(self.pi, dtype=float)
        for name, arr, want in (("A0", self.A0, shape), ("Ai", self.Ai, (3,) + shape),
                                ("p0", self.p0, shape), ("pi", self.pi, (3,) + shape)):
            if arr.shape != want:
                raise ValueError(f"{name} has shape {arr.shape}, expected {want}")

    @classmethod
    def zeros(cls, grid: GridSpec, c: float = C_DESK, time: float = 0.0) -> "FieldState":
        return cls(grid, grid.zeros(), grid.zeros(3), grid.zeros(), grid.zeros(3), time, c)

    def copy(self) -> "FieldState":
        return FieldState(self.grid, self.A0.copy(), self.Ai.copy(), self.p0.copy(), self.pi.copy(),
                          self.time, self.c)

    def arrays(self):
        return self.A0, self.Ai, self.p0, self.pi

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays()) and np.isfinite(self.time)


def _zero(t):
    return 0.0


@dataclass
class CurrentSource:
    """Prescribed charge density ``rho(t)`` and current ``j^i(t)``.

    Callables return a grid array (``(nx,ny,nz)`` and ``(3,nx,ny,nz)``) or a
    scalar 0. ``rho_dot`` is the exact time derivative of ``rho`` when the
    provider knows it; it is used to check discrete continuity.
    """

    rho: Callable = _zero
    ji: Callable = _zero
    continuity_certified: bool = True
    rho_dot: Optional[Callable] = None
    name: str = "vacuum"
    params: dict = field(default_factory=dict)

    @classmethod
    def vacuum(cls) -> "CurrentSource":
        return cls()

    def j0(self, t, c):
        return c * np.asarray(self.rho(t))

    @property
    def is_vacuum(self) -> bool:
        return self.rho is _zero and self.ji is _zero


def continuity_residual(source: CurrentSource, metric: SpacetimeMetric, grid: GridSpec, t: float):
    """``d_t(sqrt(3g) rho) + d_i(sqrt(3g) j^i)`` with the grid divergence."""
    if source.rho_dot is None:
        raise ValueError("source does not provide rho_dot")
    s3 = sqrt_spatial_det(metric)
    j = np.broadcast_to(np.asarray(source.ji(t), dtype=float), (3,) + grid.shape)
    return s3 * np.asarray(source.rho_dot(t)) + divergence(s3 * j, grid)


# index bookkeeping ------------------------------------------------------------

def lower_momentum(pi: np.ndarray, metric: SpacetimeMetric) -> np.ndarray:
    """``p_i = g_00 g_ii p^i``."""
    g = metric.diag
    return np.stack([g[0] * g[i + 1] * pi[i] for i in range(3)])


def raise_momentum(p_lower: np.ndarray, metric: SpacetimeMetric) -> np.ndarray:
    g = metric.diag
    return np.stack([p_lower[i] / (g[0] * g[i + 1]) for i in range(3)])


def momenta_from_velocities(Ai_dot: np.ndarray, state: FieldState, metric: SpacetimeMetric) -> np.ndarray:
    """Contravariant ``p^i`` from ``Adot_i`` via ``p_i = -(sqrt(-g)/4 pi c^2)(A_{i,0} - A_{0,i})``."""
    c = state.c
    sg = sqrt_minus_g(metric)
    dA0 = gradient(state.A0, state.grid)
    p_lower = -(sg / (FOUR_PI * c * c)) * (np.asarray(Ai_dot) / c - dA0)
    return raise_momentum(p_lower, metric)


def velocities_from_momenta(state: FieldState, metric: SpacetimeMetric) -> np.ndarray:
    """``Adot_i = -(4 pi c^3 / sqrt(-g)) p_i + c A_{0,i}``."""
    c = state.c
    sg = sqrt_minus_g(metric)
    p_lower = lower_momentum(state.pi, metric)
    return -(FOUR_PI * c ** 3 / sg) * p_lower + c * gradient(state.A0, state.grid)


# field tensor -----------------------------------------------------------------

def spatial_field_lower(Ai: np.ndarray, grid: GridSpec) -> dict:
    """``F_{jk} = A_{k,j} - A_{j,k}`` for ``(j, k)`` in (0,1), (1,2), (2,0) (spatial labels)."""
    d = grid.dx
    out = {}
    for j, k in ((0, 1), (1, 2), (2, 0)):
        out[(j, k)] = ddx(Ai[k], j, d[j]) - ddx(Ai[j], k, d[k])
    return out


def electric_field_lower(state: FieldState, metric: SpacetimeMetric) -> np.ndarray:
    """``F_{i0} = 4 pi c^2 p_i / sqrt(-g)`` (momentum relation inverted)."""
    c = state.c
    return FOUR_PI * c * c * lower_momentum(state.pi, metric) / sqrt_minus_g(metric)


@dataclass
class FieldTensor:
    F_lower: np.ndarray
    F_upper: np.ndarray


def field_tensor(state: FieldState, metric: SpacetimeMetric) -> FieldTensor:
    shape = state.grid.shape
    F = np.zeros((4, 4) + shape)
    Fi0 = electric_field_lower(state, metric)
    for i in range(3):
        F[i + 1, 0] = Fi0[i]
        F[0, i + 1] = -Fi0[i]
    for (j, k), val in spatial_field_lower(state.Ai, state.grid).items():
        F[j + 1, k + 1] = val
        F[k + 1, j + 1] = -val
    return FieldTensor(F, raise_antisym(metric, F))


_LEVI = {(0, 1, 2): 1, (1, 2, 0): 1, (2, 0, 1): 1, (0, 2, 1): -1, (2, 1, 0): -1, (1, 0, 2): -1}


def extract_DH(F: FieldTensor):
    """``D^i = F^{i0}``, ``H_i = -1/2 eps_{ijk} F^{jk}``."""
    Fu = F.F_upper
    D = np.stack([Fu[i + 1, 0] for i in range(3)])
    H = np.zeros_like(D)
    for (i, j, k), sign in _LEVI.items():
        H[i] -= 0.5 * sign * Fu[j + 1, k + 1]
    return D, H


def _spatial_field_upper(state: FieldState, metric: SpacetimeMetric) -> dict:
    g = metric.diag
    return {(j, k): val / (g[j + 1] * g[k + 1])
            for (j, k), val in spatial_field_lower(state.Ai, state.grid).items()}


def displacement_and_magnetic(state: FieldState, metric: SpacetimeMetric):
    """Same ``(D, H)`` as ``extract_DH(field_tensor(...))`` without building 4x4 arrays."""
    c = state.c
    D = FOUR_PI * c * c * state.pi / sqrt_minus_g(metric)
    Fu = _spatial_field_upper(state, metric)
    H = np.stack([-Fu[(1, 2)], -Fu[(2, 0)], -Fu[(0, 1)]])
    return D, H


def bianchi_spatial(state: FieldState) -> np.ndarray:
    """Cyclic sum ``d_1 F_23 + d_2 F_31 + d_3 F_12`` of the lower spatial block."""
    grid = state.grid
    F = spatial_field_lower(state.Ai, grid)
    return ddx(F[(1, 2)], 0, grid.dx[0]) + ddx(F[(2, 0)], 1, grid.dx[1]) + ddx(F[(0, 1)], 2, grid.dx[2])


# densities ---------------------------------------------------------------------

def _source_terms(state, metric, source, t):
    c = state.c
    rho = np.asarray(source.rho(t), dtype=float)
    j = np.broadcast_to(np.asarray(source.ji(t), dtype=float), (3,) + state.grid.shape)
    return c * rho, j


def _invariant_FF(Fi0, Fs_lower, metric):
    """``F_ab F^ab`` from ``F_{i0}`` and the spatial lower block (diagonal metric)."""
    g = metric.diag
    FF = 0.0
    for i in range(3):
        FF = FF + 2.0 * Fi0[i] ** 2 / (g[i + 1] * g[0])
    for (j, k), val in Fs_lower.items():
        FF = FF + 2.0 * val ** 2 / (g[j + 1] * g[k + 1])
    return FF


def em_lagrangian_density(state: FieldState, metric: SpacetimeMetric, source: Optional[CurrentSource] = None,
                          Ai_dot: Optional[np.ndarray] = None, cell=None):
    """``-(1/16 pi c) F_ab F^ab sqrt(-g) - (1/c^2) A_a j^a sqrt(-g)``.

    ``Ai_dot`` defaults to the velocities implied by the state's momenta.
    """
    source = source or CurrentSource.vacuum()
    c = state.c
    if Ai_dot is None:
        Ai_dot = velocities_from_momenta(state, metric)
    Fi0 = gradient(state.A0, state.grid) - np.asarray(Ai_dot) / c
    FF = _invariant_FF(Fi0, spatial_field_lower(state.Ai, state.grid), metric)
    j0, j = _source_terms(state, metric, source, state.time)
    sg = sqrt_minus_g(metric)
    Aj = state.A0 * j0 + np.sum(state.Ai * j, axis=0)
    dens = -(sg / (16 * np.pi * c)) * FF - (sg / c ** 2) * Aj
    dens = np.broadcast_to(dens, state.grid.shape)
    return float(dens[tuple(cell)]) if cell is not None else np.array(dens)


def hamiltonian_density(state: FieldState, metric: SpacetimeMetric, source: Optional[CurrentSource] = None,
                        lam=0.0) -> np.ndarray:
    """Density ``p^i Adot_i - L + lambda p^0`` in canonical variables.

    ``Adot_i`` comes from the momenta and the ``F_{i0}`` entries of the
    quadratic invariant from the inverted momentum relation.
    """
    source = source or CurrentSource.vacuum()
    c = state.c
    sg = sqrt_minus_g(metric)
    p_lower = lower_momentum(state.pi, metric)
    kinetic = np.sum(state.pi * (-(FOUR_PI * c ** 3 / sg) * p_lower + c * gradient(state.A0, state.grid)), axis=0)
    FF = _invariant_FF(electric_field_lower(state, metric), spatial_field_lower(state.Ai, state.grid), metric)
    j0, j = _source_terms(state, metric, source, state.time)
    Aj = state.A0 * j0 + np.sum(state.Ai * j, axis=0)
    dens = kinetic + (sg / (16 * np.pi * c)) * FF + (sg / c ** 2) * Aj + lam * state.p0
    return np.broadcast_to(dens, state.grid.shape)


def hamiltonian_total(state: FieldState, metric: SpacetimeMetric, source: Optional[CurrentSource] = None,
                      lam=0.0) -> float:
    return float(np.sum(hamiltonian_density(state, metric, source, lam)) * state.grid.cell_volume)


def field_energy(state: FieldState, metric: SpacetimeMetric) -> float:
    """Flat-space field energy ``(1/8 pi) sum (D^2 + H^2) dV``."""
    D, H = displacement_and_magnetic(state, metric)
    return float(np.sum(D ** 2 + H ** 2) * state.grid.cell_volume / (8 * np.pi))


# Hamilton's equations ------------------------------------------------------------

@dataclass
class Derivatives:
    A0_dot: np.ndarray
    Ai_dot: np.ndarray
    p0_dot: np.ndarray
    pi_dot: np.ndarray


def p0_rate(state: FieldState, metric: SpacetimeMetric, source: CurrentSource, t=None) -> np.ndarray:
    """``-dH/dA_0 = c p^i_{,i} - (sqrt(-g)/c^2) j^0``."""
    t = state.time if t is None else t
    c = state.c
    j0 = c * np.asarray(source.rho(t), dtype=float)
    return c * divergence(state.pi, state.grid) - (sqrt_minus_g(metric) / c ** 2) * j0


def pi_rate(state: FieldState, metric: SpacetimeMetric, source: CurrentSource, t=None) -> np.ndarray:
    """``-dH/dA_i = (1/4 pi c) d_j(sqrt(-g) F^{ji}) - (sqrt(-g)/c^2) j^i``."""
    t = state.time if t is None else t
    c = state.c
    grid = state.grid
    sg = sqrt_minus_g(metric)
    Fu = _spatial_field_upper(state, metric)

    def upper(j, i):
        if (j, i) in Fu:
            return Fu[(j, i)]
        return -Fu[(i, j)]

    out = np.empty((3,) + grid.shape)
    for i in range(3):
        acc = 0.0
        for j in range(3):
            if j != i:
                acc = acc + ddx(sg * upper(j, i), j, grid.dx[j])
        out[i] = acc / (FOUR_PI * c)
    if not source.is_vacuum:
        j = np.broadcast_to(np.asarray(source.ji(t), dtype=float), (3,) + grid.shape)
        out -= (sg / c ** 2) * j
    return out


def rhs(state: FieldState, metric: SpacetimeMetric, source: Optional[CurrentSource] = None,
        lambda_field=0.0) -> Derivatives:
    source = source or CurrentSource.vacuum()
    A0_dot = np.broadcast_to(np.asarray(lambda_field, dtype=float), state.grid.shape).copy()
    return Derivatives(A0_dot, velocities_from_momenta(state, metric), p0_rate(state, metric, source),
                       pi_rate(state, metric, source))


# residuals of the recovered inhomogeneous equations -----------------------------

def gauss_residual(state: FieldState, metric: SpacetimeMetric, source: Optional[CurrentSource] = None,
                   D: Optional[np.ndarray] = None) -> np.ndarray:
    """``(1/sqrt(3g)) d_i(sqrt(3g) D^i) - 4 pi rho``."""
    source = source or CurrentSource.vacuum()
    if D is None:
        D, _ = displacement_and_magnetic(state, metric)
    s3 = sqrt_spatial_det(metric)
    rho = np.asarray(source.rho(state.time), dtype=float)
    return divergence(s3 * D, state.grid) / s3 - FOUR_PI * rho


def ampere_residual(state: FieldState, metric: SpacetimeMetric, source: Optional[CurrentSource],
                    Di_dot: np.ndarray, H: Optional[np.ndarray] = None) -> np.ndarray:
    """``(1/sqrt(3g)) [d_j(sqrt(3g) H_k) - d_k(sqrt(3g) H_j)] - (1/c) d_t D^i - (4 pi/c) j^i``, (i,j,k) cyclic."""
    source = source or CurrentSource.vacuum()
    grid = state.grid
    c = state.c
    if H is None:
        _, H = displacement_and_magnetic(state, metric)
    s3 = sqrt_spatial_det(metric)
    sH = s3 * H
    j = np.broadcast_to(np.asarray(source.ji(state.time), dtype=float), (3,) + grid.shape)
    out = np.empty((3,) + grid.shape)
    for i in range(3):
        jj, kk = (i + 1) % 3, (i + 2) % 3
        curl = ddx(sH[kk], jj, grid.dx[jj]) - ddx(sH[jj], kk, grid.dx[kk])
        out[i] = curl / s3 - np.asarray(Di_dot[i]) / c - FOUR_PI * j[i] / c
    return out


def displacement_rate(D_prev: np.ndarray, D_next: np.ndarray, dt: float) -> np.ndarray:
    """Centered ``d_t D`` from the neighbours of a step."""
    return (D_next - D_prev) / (2.0 * dt)


# snapshots ----------------------------------------------------------------------

SNAPSHOT_MAGIC = b"CMXSNAP1"
SNAPSHOT_FIELDS = ("A0", "A1", "A2", "A3", "p0", "p1", "p2", "p3")
_HEADER_DTYPE = np.dtype([("magic", "S8"), ("n", "<i8", (3,)), ("dx", "<f8", (3,)), ("time", "<f8")])


def write_snapshot(path, state: FieldState, metadata: Optional[dict] = None) -> Path:
    """Write ``<path>`` (binary) and ``<path>.json`` (sidecar).

    Binary layout: a 64-byte little-endian header (8-byte magic
    ``CMXSNAP1``, three int64 cell counts, three float64 cell sizes, float64
    time) followed by the eight fields ``A0, A1, A2, A3, p0, p1, p2, p3``,
    each ``nx*ny*nz`` float64 little-endian values in C order.
    """
    path = Path(path)
    header = np.zeros((), dtype=_HEADER_DTYPE)
    header["magic"] = SNAPSHOT_MAGIC
    header["n"] = state.grid.n
    header["dx"] = state.grid.dx
    header["time"] = state.time
    with open(path, "wb") as fh:
        fh.write(header.tobytes())
        for arr in (state.A0, *state.Ai, state.p0, *state.pi):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    meta = {
        "format": "cmaxwell-snapshot",
        "version": 1,
        "header_bytes": _HEADER_DTYPE.itemsize,
        "fields": list(SNAPSHOT_FIELDS),
        "dtype": "float64",
        "byte_order": "little",
        "order": "C",
        "shape": list(state.grid.n),
        "dx": list(state.grid.dx),
        "time": state.time,
        "c": state.c,
    }
    meta.update(metadata or {})
    Path(str(path) + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    return path


def read_snapshot(path):
    """Return ``(FieldState, metadata)`` from a snapshot written by ``write_snapshot``."""
    path = Path(path)
    raw = path.read_bytes()
    header = np.frombuffer(raw[:_HEADER_DTYPE.itemsize], dtype=_HEADER_DTYPE)[0]
    if header["magic"] != SNAPSHOT_MAGIC:
        raise ValueError(f"{path} is not a snapshot file")
    sidecar = Path(str(path) + ".json")
    meta = json.loads(sidecar.read_text()) if sidecar.exists() else {}
    grid = GridSpec(tuple(int(v) for v in header["n"]), tuple(float(v) for v in header["dx"]))
    body = np.frombuffer(raw[_HEADER_DTYPE.itemsize:], dtype="<f8").reshape((8,) + grid.shape)
    state = FieldState(grid, body[0].copy(), body[1:4].copy(), body[4].copy(), body[5:8].copy(),
                       float(header["time"]), float(meta.get("c", C_DESK)))
    return state, meta
