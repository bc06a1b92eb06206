import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cmaxwell.errors import NonLorentzianMetric
from cmaxwell.geometry import (
    GridSpec,
    SpacetimeMetric,
    lower_antisym,
    raise_antisym,
    spatial_det,
    sqrt_minus_g,
    sqrt_spatial_det,
)

positive = st.floats(0.1, 10.0)


def _tensor(entries):
    F = np.zeros((4, 4))
    for (a, b), v in entries.items():
        F[a, b] = v
        F[b, a] = -v
    return F


# grid ----------------------------------------------------------------------------

def test_grid_rejects_small_or_bad_spacing():
    with pytest.raises(ValueError):
        GridSpec((3, 8, 8), (0.1, 0.1, 0.1))
    with pytest.raises(ValueError):
        GridSpec((8, 8, 8), (0.1, 0.0, 0.1))
    g = GridSpec.cube(8, 2.0)
    assert g.periodic and g.shape == (8, 8, 8) and g.dx == (0.25, 0.25, 0.25)
    assert g.cell_volume == pytest.approx(0.25 ** 3)


# determinants -------------------------------------------------------------------

def test_sqrt_minus_g_examples():
    assert sqrt_minus_g(SpacetimeMetric.minkowski()) == 1.0
    assert sqrt_minus_g(SpacetimeMetric.diagonal(1, -4, -1, -1)) == pytest.approx(2.0)
    r, theta = 2.0, np.pi / 2
    sph = SpacetimeMetric.diagonal(1, -1, -r ** 2, -(r * np.sin(theta)) ** 2)
    # det = -r^4 sin^2(theta) evaluated independently
    assert sqrt_minus_g(sph) == pytest.approx(np.sqrt(r ** 4 * np.sin(theta) ** 2), rel=1e-14)
    assert sqrt_minus_g(sph) == pytest.approx(4.0)


def test_spatial_det_examples():
    assert spatial_det(SpacetimeMetric.minkowski()) == 1.0
    assert spatial_det(SpacetimeMetric.diagonal(1, -4, -1, -1)) == pytest.approx(4.0)
    m = SpacetimeMetric.diagonal(4, -1, -1, -1)
    assert spatial_det(m) == pytest.approx(1.0)
    assert sqrt_minus_g(m) == pytest.approx(2.0)


def test_non_lorentzian_metric_rejected():
    with pytest.raises(NonLorentzianMetric):
        sqrt_minus_g(SpacetimeMetric.diagonal(1, 1, -1, -1))
    with pytest.raises(NonLorentzianMetric):
        spatial_det(SpacetimeMetric.diagonal(-1, -1, -1, -1))


def test_from_matrix_restrictions():
    g = np.diag([1.0, -1.0, -2.0, -3.0])
    assert np.array_equal(SpacetimeMetric.from_matrix(g).matrix(), g)
    shifted = g.copy()
    shifted[0, 1] = shifted[1, 0] = 0.1
    with pytest.raises(ValueError, match="shift"):
        SpacetimeMetric.from_matrix(shifted)
    asym = g.copy()
    asym[1, 2] = 0.1
    with pytest.raises(ValueError, match="symmetric"):
        SpacetimeMetric.from_matrix(asym)


def test_sinusoidal_metric_per_cell():
    grid = GridSpec.cube(8)
    m = SpacetimeMetric.sinusoidal(grid, (0.2, 0.1, -0.3), g00=2.0)
    assert not m.is_constant
    sg = sqrt_minus_g(m)
    assert sg.shape == grid.shape
    cell = (3, 5, 1)
    M = m.matrix(cell)
    assert sqrt_minus_g(m, cell) == pytest.approx(np.sqrt(-np.linalg.det(M)), rel=1e-13)
    assert np.allclose(M @ np.linalg.inv(M), np.eye(4), atol=1e-12)
    with pytest.raises(ValueError):
        SpacetimeMetric.sinusoidal(grid, (1.0, 0.0, 0.0))


# raising and lowering --------------------------------------------------------------

def test_raise_examples():
    flat = SpacetimeMetric.minkowski()
    E, B = 0.7, -1.3
    assert raise_antisym(flat, _tensor({(0, 1): E}))[0, 1] == -E
    assert raise_antisym(flat, _tensor({(1, 2): B}))[1, 2] == B
    m = SpacetimeMetric.diagonal(1, -4, -1, -1)
    assert raise_antisym(m, _tensor({(0, 1): 1.0}))[0, 1] == pytest.approx(-0.25)


def test_raise_rejects_non_antisymmetric():
    F = _tensor({(0, 1): 1.0})
    F[2, 3] = 0.5
    with pytest.raises(ValueError):
        raise_antisym(SpacetimeMetric.minkowski(), F)


def test_raise_on_grid_with_constant_metric():
    grid = GridSpec.cube(4)
    F = np.zeros((4, 4) + grid.shape)
    F[0, 2], F[2, 0] = 2.0, -2.0
    up = raise_antisym(SpacetimeMetric.stretch((1.0, 2.0, 1.0)), F)
    assert up.shape == F.shape and np.all(up[0, 2] == -0.5)


metrics = st.builds(
    lambda a, b, c, d: SpacetimeMetric.diagonal(a, -b, -c, -d), positive, positive, positive, positive)
antisym = st.lists(st.floats(-5, 5), min_size=6, max_size=6).map(
    lambda v: _tensor(dict(zip([(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)], v))))


@settings(max_examples=60, deadline=None)
@given(metrics, antisym)
def test_raise_then_lower_is_identity(m, F):
    up = raise_antisym(m, F)
    assert np.array_equal(up, -np.swapaxes(up, 0, 1))
    assert np.allclose(lower_antisym(m, up), F, rtol=1e-12, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(antisym)
def test_minkowski_sign_pattern(F):
    up = raise_antisym(SpacetimeMetric.minkowski(), F)
    assert np.array_equal(up[0, 1:], -F[0, 1:])
    assert np.array_equal(up[1:, 1:], F[1:, 1:])


@settings(max_examples=60, deadline=None)
@given(metrics)
def test_sqrt_minus_g_splits(m):
    g00 = m.diag[0]
    assert sqrt_minus_g(m) == pytest.approx(np.sqrt(g00) * np.sqrt(spatial_det(m)), rel=1e-12)
    assert sqrt_spatial_det(m) == pytest.approx(np.sqrt(spatial_det(m)), rel=1e-12)
    M = m.matrix()
    assert np.allclose(np.linalg.inv(M) @ M, np.eye(4), atol=1e-12)
