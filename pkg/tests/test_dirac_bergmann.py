import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cmaxwell import dirac_bergmann as db
from cmaxwell.errors import EvaluationFailure, NewtonDivergence, RankDrift, UnresolvedMultipliers
from cmaxwell.verify import mixed_velocity_system


def system(dim, f, name="test"):
    return db.LagrangianSystem(dim, f, name)


# velocity Hessian ------------------------------------------------------------------

def test_hessian_examples():
    W = db.velocity_hessian(system(1, lambda t, q, v: 0.5 * v[0] ** 2), 0.0, [0.3], [1.1])
    assert np.allclose(W, [[1.0]], atol=1e-8)
    W = db.velocity_hessian(system(2, lambda t, q, v: v[0] * q[1] - q @ q), 0.0, [0.4, -1.2], [0.7, 2.0])
    assert np.allclose(W, np.zeros((2, 2)), atol=1e-8)
    W = db.velocity_hessian(system(2, lambda t, q, v: 0.5 * v[0] ** 2 + v[0] * v[1]), 0.0, [0, 0], [0.5, -0.3])
    assert np.allclose(W, [[1, 1], [1, 0]], atol=1e-8)
    assert np.array_equal(W, W.T)


def test_non_finite_lagrangian_raises():
    sys = system(1, lambda t, q, v: v[0] if v[0] > 0 else np.inf)
    with pytest.raises(EvaluationFailure):
        db.velocity_hessian(sys, 0.0, [0.0], [-1.0])


def test_dim_must_be_positive():
    with pytest.raises(ValueError):
        system(0, lambda t, q, v: 0.0)


# singularity report ------------------------------------------------------------------

def test_singularity_examples():
    rep = db.singularity_report(np.eye(2))
    assert rep.rank == 2 and not rep.is_singular and rep.null_basis.shape == (2, 0)
    rep = db.singularity_report(np.zeros((2, 2)))
    assert rep.rank == 0 and rep.is_singular and rep.null_basis.shape == (2, 2)
    rep = db.singularity_report(np.ones((2, 2)))
    assert rep.rank == 1
    n = rep.null_basis[:, 0]
    assert abs(abs(n @ np.array([1, -1]) / np.sqrt(2)) - 1) < 1e-10


def test_absolute_floor_treats_noise_as_zero():
    assert db.singularity_report(1e-9 * np.eye(2)).rank == 2
    assert db.singularity_report(1e-9 * np.eye(2), atol=1e-7).rank == 0


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6), st.integers(0, 5), st.integers(0, 10 ** 6))
def test_null_basis_orthonormal(n, k, seed):
    k = min(k, n)
    rng = np.random.default_rng(seed)
    B = rng.normal(size=(n, n - k))
    W = B @ B.T
    rep = db.singularity_report(W)
    assert rep.rank == n - k
    N = rep.null_basis
    assert np.allclose(N.T @ N, np.eye(k), atol=1e-10)
    assert np.allclose(W @ N, 0.0, atol=1e-8 * max(1.0, np.linalg.norm(W)))


# Legendre transform ------------------------------------------------------------------

def test_legendre_regular_free_particle():
    ch = db.legendre_transform(system(1, lambda t, q, v: 0.5 * v[0] ** 2), 0.0, [0.0], [0.5])
    assert len(ch.constraints) == 0 and ch.rank == 1
    for p in (-2.0, 0.3, 4.0):
        assert ch(0.0, [0.1], [p]) == pytest.approx(0.5 * p * p, rel=1e-9)


def test_legendre_mixed_velocity_constraints():
    sys = system(2, lambda t, q, v: v[0] * q[1])
    ch = db.legendre_transform(sys, 0.0, [0.2, 0.5], [0.1, -0.3])
    assert len(ch.constraints) == 2 and ch.rank == 0
    assert ch.constraints.kinds() == ["primary", "primary"]
    rng = np.random.default_rng(0)
    # constraints are linear in (p1 - q2, p2); fit the map and check it is invertible
    rows, targets = [], []
    for _ in range(6):
        q, p = rng.normal(size=2), rng.normal(size=2)
        rows.append(ch.constraints.values(0.0, q, p))
        targets.append([p[0] - q[1], p[1]])
    T, *_ = np.linalg.lstsq(np.array(targets), np.array(rows), rcond=None)
    assert np.allclose(np.array(targets) @ T, rows, atol=1e-8)
    assert abs(np.linalg.det(T)) == pytest.approx(1.0, abs=1e-8)
    q = np.array([0.3, -1.1])
    p = np.array([q[1], 0.0])
    assert ch.constraints.on_surface(0.0, q, p)
    assert abs(ch(0.0, q, p)) < 1e-9


def _nonquadratic():
    return system(2, lambda t, q, v: 0.5 * v[0] ** 2 + 0.25 * v[0] ** 4 + 0.5 * (1 + q[0] ** 2) * v[1] ** 2
                  + 0.3 * v[0] * v[1] - 0.5 * (q @ q))


def test_hamiltonian_reproduces_legendre_relation():
    sys = _nonquadratic()
    rng = np.random.default_rng(3)
    ch = db.legendre_transform(sys, 0.0, [0.1, 0.2], [0.3, 0.1])
    for _ in range(10):
        q, v = rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2)
        p = sys.momenta(0.0, q, v)
        ref = p @ v - sys(0.0, q, v)
        assert ch(0.0, q, p) == pytest.approx(ref, rel=1e-9, abs=1e-12)
        assert np.allclose(ch.velocities(0.0, q, p), v, atol=1e-8)


def test_rank_drift_detected():
    sys = system(1, lambda t, q, v: v[0] ** 3 / 6.0)
    with pytest.raises(RankDrift):
        db.legendre_transform(sys, 0.0, [0.0], [0.0])


def test_newton_divergence_reports_residual():
    sys = system(1, lambda t, q, v: np.cos(v[0]))
    ch = db.legendre_transform(sys, 0.0, [0.0], [0.0])
    with pytest.raises(NewtonDivergence) as exc:
        ch(0.0, [0.0], [2.0])
    assert "residual" in str(exc.value)


# Poisson brackets -------------------------------------------------------------------

def coord(i):
    return lambda t, q, p: q[i]


def mom(i):
    return lambda t, q, p: p[i]


def test_bracket_examples():
    q, p = np.array([1.0, 2.0]), np.array([3.0, 5.0])
    assert db.poisson_bracket(coord(0), mom(0), 0.0, q, p) == pytest.approx(1.0, abs=1e-10)
    assert db.poisson_bracket(coord(0), coord(1), 0.0, q, p) == pytest.approx(0.0, abs=1e-12)
    f = lambda t, q, p: p[0] * p[1]
    g = lambda t, q, p: q[0] * q[1]
    assert db.poisson_bracket(f, g, 0.0, q, p) == pytest.approx(-13.0, abs=1e-8)


coeffs = st.lists(st.floats(-2, 2), min_size=5, max_size=5)
points = st.lists(st.floats(-1.5, 1.5), min_size=4, max_size=4)


def poly(c):
    return lambda t, q, p: (c[0] * q[0] * p[1] + c[1] * q[1] ** 2 * p[0] + c[2] * p[0] ** 2
                            + c[3] * q[0] ** 3 + c[4] * q[0] * q[1] * p[1] ** 2)


@settings(max_examples=50, deadline=None)
@given(coeffs, coeffs, points)
def test_bracket_antisymmetry(a, b, z):
    q, p = np.array(z[:2]), np.array(z[2:])
    f, g = poly(a), poly(b)
    assert db.poisson_bracket(f, g, 0.0, q, p) == pytest.approx(-db.poisson_bracket(g, f, 0.0, q, p), abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(coeffs, coeffs, coeffs, points)
def test_bracket_leibniz(a, b, c, z):
    q, p = np.array(z[:2]), np.array(z[2:])
    f, g, h = poly(a), poly(b), poly(c)
    fg = lambda t, q_, p_: f(t, q_, p_) * g(t, q_, p_)
    lhs = db.poisson_bracket(fg, h, 0.0, q, p)
    rhs = f(0.0, q, p) * db.poisson_bracket(g, h, 0.0, q, p) + db.poisson_bracket(f, h, 0.0, q, p) * g(0.0, q, p)
    assert lhs == pytest.approx(rhs, abs=1e-7)


# constrained vector field ---------------------------------------------------------------

def test_constrained_rhs_examples():
    free = db.ConstrainedHamiltonian(lambda t, q, p: 0.5 * p @ p, db.ConstraintSet())
    qd, pd = db.constrained_rhs(free, 0.0, [1.0], [0.7])
    assert qd == pytest.approx([0.7]) and pd == pytest.approx([0.0], abs=1e-12)
    phi = db.ConstraintSet([db.Constraint(lambda t, q, p: p[0])])
    ch = db.ConstrainedHamiltonian(lambda t, q, p: 0.0, phi, multipliers=np.array([3.0]))
    qd, pd = db.constrained_rhs(ch, 0.0, [0.2], [0.0])
    assert qd == pytest.approx([3.0]) and pd == pytest.approx([0.0], abs=1e-12)
    with pytest.raises(UnresolvedMultipliers):
        db.constrained_rhs(ch.with_multipliers(None), 0.0, [0.2], [0.0])


def test_regular_system_reduces_to_hamilton_equations():
    sys = _nonquadratic()
    ch = db.legendre_transform(sys, 0.0, [0.1, 0.2], [0.3, 0.1])
    assert len(ch.constraints) == 0
    q, p = np.array([0.4, -0.2]), np.array([0.5, 0.3])
    qd, pd = db.constrained_rhs(ch, 0.0, q, p)
    Hq, Hp = db.phase_gradient(ch.hamiltonian, 0.0, q, p)
    assert np.allclose(qd, Hp) and np.allclose(pd, -Hq)


# consistency ---------------------------------------------------------------------------

def test_consistency_mixed_velocity():
    sys = mixed_velocity_system()
    q, v = np.array([0.3, -0.4]), np.array([0.1, 0.2])
    ch = db.legendre_transform(sys, 0.0, q, v)
    res = db.consistency_resolve(ch, 0.0, q, sys.momenta(0.0, q, v))
    assert res.all_fixed and res.new_constraints == []
    assert abs(abs(res.bracket_matrix[0, 1]) - 1.0) < 1e-8


def test_consistency_no_constraints():
    ch = db.legendre_transform(system(1, lambda t, q, v: 0.5 * v[0] ** 2), 0.0, [0.0], [0.5])
    res = db.consistency_resolve(ch, 0.0, [0.0], [0.5])
    assert res.lambdas.size == 0 and res.new_constraints == []


def test_first_class_constraint_leaves_multiplier_free():
    # L = 1/2 (qdot1 - qdot2)^2 has a gauge direction (1, 1)
    sys = system(2, lambda t, q, v: 0.5 * (v[0] - v[1]) ** 2)
    ch = db.legendre_transform(sys, 0.0, [0.0, 0.0], [0.4, 0.1])
    assert len(ch.constraints) == 1
    p = sys.momenta(0.0, [0.0, 0.0], [0.4, 0.1])
    res = db.consistency_resolve(ch, 0.0, np.zeros(2), p)
    assert bool(res.arbitrary[0]) and res.new_constraints == []
    with pytest.raises(UnresolvedMultipliers):
        db.constrained_rhs(ch.with_resolved_multipliers(), 0.0, np.zeros(2), p)
    qd, _ = db.constrained_rhs(ch.with_resolved_multipliers(arbitrary=0.0), 0.0, np.zeros(2), p)
    assert np.all(np.isfinite(qd))


def test_constraint_drift_along_resolved_flow():
    sys = mixed_velocity_system()
    q0 = np.array([0.3, -0.7])
    v0 = np.array([q0[1], -q0[0]])
    ch = db.legendre_transform(sys, 0.0, q0, v0).with_resolved_multipliers()
    p0 = sys.momenta(0.0, q0, v0)
    t, q, p = db.integrate_constrained(ch, (0.0, 1.0), q0, p0, np.linspace(0, 1, 21))
    drift = max(np.max(np.abs(ch.constraints.values(ti, qi, pi))) for ti, qi, pi in zip(t, q, p))
    assert drift <= ch.constraints.tolerance


def test_projection_lands_on_surface():
    sys = mixed_velocity_system()
    ch = db.legendre_transform(sys, 0.0, [0.1, 0.2], [0.3, 0.4])
    q, p = db.project_to_surface(ch.constraints, 0.0, [0.5, 0.2], [1.0, 0.7])
    assert ch.constraints.on_surface(0.0, q, p)
