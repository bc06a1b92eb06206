"""Static block-diagonal spacetime metrics on a periodic collocated grid.

Signature is (+,-,-,-). Only diagonal metrics are represented: the time
block is separate from the spatial block by construction (no shift), and the
built-in families are all diagonal, so the metric is stored as its four
diagonal entries, either as constants or sampled per cell.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from cmaxwell.errors import NonLorentzianMetric

SYMMETRY_TOL = 1e-14


@dataclass(frozen=True)
class GridSpec:
    """Periodic structured grid: ``n`` cells per axis of size ``dx`` (cm)."""

    n: tuple[int, int, int]
    dx: tuple[float, float, float]
    periodic: bool = field(default=True, init=False)

    def __post_init__(self):
        n = tuple(int(v) for v in self.n)
        dx = tuple(float(v) for v in self.dx)
        if len(n) != 3 or len(dx) != 3:
            raise ValueError("GridSpec needs three cell counts and three spacings")
        if min(n) < 4:
            raise ValueError(f"every axis needs at least 4 cells, got n={n}")
        if min(dx) <= 0 or not all(np.isfinite(dx)):
            raise ValueError(f"cell sizes must be positive, got dx={dx}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "dx", dx)

    @classmethod
    def cube(cls, n: int, length: float = 1.0) -> "GridSpec":
        return cls((n, n, n), (length / n,) * 3)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.n

    @property
    def lengths(self) -> tuple[float, float, float]:
        return tuple(n * d for n, d in zip(self.n, self.dx))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.dx))

    @property
    def min_dx(self) -> float:
        return min(self.dx)

    def coords(self):
        """Cell coordinates ``x_i = i * dx`` as three broadcastable arrays."""
        axes = [np.arange(n) * d for n, d in zip(self.n, self.dx)]
        return np.meshgrid(*axes, indexing="ij", sparse=True)

    def zeros(self, *lead: int) -> np.ndarray:
        return np.zeros(tuple(lead) + self.n)


@dataclass(frozen=True, eq=False)
class SpacetimeMetric:
    """Diagonal static metric ``g = diag(g00, g11, g22, g33)``.

    ``diag`` has shape ``(4,)`` for a constant metric or ``(4, nx, ny, nz)``
    when sampled per cell. ``family`` and ``params`` are kept for echoing
    the effective configuration.
    """

    diag: np.ndarray
    family: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        diag = np.asarray(self.diag, dtype=float)
        if diag.ndim not in (1, 4) or diag.shape[0] != 4:
            raise ValueError(f"metric diagonal must have shape (4,) or (4,nx,ny,nz), got {diag.shape}")
        if not np.all(np.isfinite(diag)):
            raise NonLorentzianMetric("metric has non-finite entries")
        det = np.prod(diag, axis=0)
        if np.any(det >= 0):
            raise NonLorentzianMetric(f"det g must be negative everywhere (max det = {np.max(det):.3e})")
        if np.any(diag[0] <= 0) or np.any(diag[1:] >= 0):
            raise NonLorentzianMetric("signature must be (+,-,-,-)")
        diag.setflags(write=False)
        object.__setattr__(self, "diag", diag)

    # construction -------------------------------------------------------

    @classmethod
    def minkowski(cls) -> "SpacetimeMetric":
        return cls(np.array([1.0, -1.0, -1.0, -1.0]), "minkowski", {})

    @classmethod
    def diagonal(cls, g00, g11, g22, g33) -> "SpacetimeMetric":
        return cls(np.array([g00, g11, g22, g33], dtype=float), "diagonal",
                   {"g": [float(g00), float(g11), float(g22), float(g33)]})

    @classmethod
    def from_matrix(cls, g) -> "SpacetimeMetric":
        """Build a constant metric from a full 4x4 matrix.

        Raises ``ValueError`` for non-symmetric input, a non-zero shift
        ``g_0i``, or off-diagonal spatial entries (not supported).
        """
        g = np.asarray(g, dtype=float)
        if g.shape != (4, 4):
            raise ValueError(f"expected a 4x4 matrix, got {g.shape}")
        if np.any(g != g.T):
            raise ValueError("metric matrix must be exactly symmetric")
        if np.any(g[0, 1:] != 0):
            raise ValueError("non-zero shift g_0i is not supported (static block-diagonal metrics only)")
        off = g[1:, 1:] - np.diag(np.diag(g[1:, 1:]))
        if np.any(off != 0):
            raise ValueError("only diagonal spatial blocks are supported")
        return cls.diagonal(*np.diag(g))

    @classmethod
    def stretch(cls, scale=(1.0, 1.0, 1.0), g00: float = 1.0) -> "SpacetimeMetric":
        """Constant diagonal stretch ``diag(g00, -a1^2, -a2^2, -a3^2)``."""
        a = np.asarray(scale, dtype=float)
        return cls(np.array([g00, -a[0] ** 2, -a[1] ** 2, -a[2] ** 2]), "stretch",
                   {"scale": a.tolist(), "g00": float(g00)})

    @classmethod
    def sinusoidal(cls, grid: GridSpec, amplitude=(0.2, 0.2, 0.2), g00: float = 1.0) -> "SpacetimeMetric":
        """Coordinate-dependent family ``g_ii = -h_i(x_i)^2``.

        ``h_i = 1 + eps_i sin(2 pi x_i / L_i)``; |eps_i| < 1. Each scale
        factor depends on its own coordinate, so this is flat space in
        periodic curvilinear coordinates.
        """
        eps = np.asarray(amplitude, dtype=float)
        if np.any(np.abs(eps) >= 1):
            raise ValueError("sinusoidal amplitudes must satisfy |eps| < 1")
        h, _ = sinusoidal_scale_factors(grid, eps)
        diag = np.empty((4,) + grid.shape)
        diag[0] = g00
        for i in range(3):
            diag[i + 1] = -np.broadcast_to(h[i], grid.shape) ** 2
        return cls(diag, "sinusoidal", {"amplitude": eps.tolist(), "g00": float(g00)})

    # queries -------------------------------------------------------------

    @property
    def is_constant(self) -> bool:
        return self.diag.ndim == 1

    def component(self, alpha: int):
        return self.diag[alpha]

    def inverse(self, alpha: int):
        return 1.0 / self.diag[alpha]

    def matrix(self, cell=None) -> np.ndarray:
        """Full 4x4 matrix at ``cell`` (or the constant matrix)."""
        d = self.diag if self.is_constant else self.diag[(slice(None),) + tuple(cell)]
        return np.diag(d)

    @property
    def uniform_lapse(self) -> bool:
        g00 = np.asarray(self.diag[0])
        return bool(np.all(g00 == g00.flat[0]))


def sinusoidal_scale_factors(grid: GridSpec, eps):
    """Scale factors ``h_i`` and their derivatives ``dh_i/dx_i`` on the grid."""
    coords = grid.coords()
    h, dh = [], []
    for i in range(3):
        k = 2.0 * np.pi / grid.lengths[i]
        h.append(1.0 + eps[i] * np.sin(k * coords[i]))
        dh.append(eps[i] * k * np.cos(k * coords[i]))
    return h, dh


def _at(values, cell):
    values = np.asarray(values)
    if cell is None or values.ndim == 0:
        return values if values.ndim else float(values)
    return float(values[tuple(cell)])


def _det(metric: SpacetimeMetric):
    return np.prod(metric.diag, axis=0)


def sqrt_minus_g(metric: SpacetimeMetric, cell=None):
    """``sqrt(-det g)``, at ``cell`` or as a grid array / scalar."""
    det = _det(metric)
    if np.any(det >= 0):
        raise NonLorentzianMetric("det g >= 0")
    return _at(np.sqrt(-det), cell)


def spatial_det(metric: SpacetimeMetric, cell=None):
    """Determinant of the spatial 3x3 block, taken as a positive number."""
    det = _det(metric)
    if np.any(det >= 0):
        raise NonLorentzianMetric("det g >= 0")
    return _at(np.abs(np.prod(metric.diag[1:], axis=0)), cell)


def sqrt_spatial_det(metric: SpacetimeMetric, cell=None):
    return _at(np.sqrt(np.abs(np.prod(metric.diag[1:], axis=0))), cell)


def _index_factors(metric: SpacetimeMetric, cell, inverse: bool):
    d = metric.diag
    if cell is not None and not metric.is_constant:
        d = d[(slice(None),) + tuple(cell)]
    return 1.0 / d if inverse else d


def _transform_antisym(F, factors):
    F = np.asarray(F, dtype=float)
    if F.shape[:2] != (4, 4):
        raise ValueError(f"field tensor must have leading shape (4, 4), got {F.shape}")
    out = np.zeros((4, 4) + np.broadcast_shapes(F.shape[2:], np.shape(factors[0])))
    for a in range(4):
        for b in range(a + 1, 4):
            out[a, b] = factors[a] * factors[b] * F[a, b]
            out[b, a] = -out[a, b]
    return out


def raise_antisym(metric: SpacetimeMetric, F_lower, cell=None):
    """``F^{ab} = g^{aa} g^{bb} F_{ab}`` (diagonal metric).

    Only the upper triangle is computed and mirrored, so the result is
    exactly antisymmetric. ``F_lower`` has shape ``(4, 4, ...)``.
    """
    F_lower = np.asarray(F_lower, dtype=float)
    if np.max(np.abs(F_lower + np.swapaxes(F_lower, 0, 1)), initial=0.0) > SYMMETRY_TOL * max(
        1.0, np.max(np.abs(F_lower), initial=0.0)
    ):
        raise ValueError("F_lower is not antisymmetric")
    return _transform_antisym(F_lower, _index_factors(metric, cell, inverse=True))


def lower_antisym(metric: SpacetimeMetric, F_upper, cell=None):
    return _transform_antisym(F_upper, _index_factors(metric, cell, inverse=False))
