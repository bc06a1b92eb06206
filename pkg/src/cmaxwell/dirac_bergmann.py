"""Finite-dimensional Dirac-Bergmann machinery.

Given a Lagrangian ``L(t, q, qdot)`` as a plain callable, this module finds
the rank of the velocity Hessian, builds the canonical Hamiltonian and the
primary constraints that come out of non-invertible momentum definitions,
evaluates Poisson brackets, and runs the constraint-consistency step that
fixes multipliers or produces secondary constraints.

Everything is numerical: derivatives are five-point central differences with
a step ``h = eps**(1/5) * max(1, |x|)``. The five-point stencil keeps nested
differentiation (brackets of constraints that are themselves built from
numerical momenta) several orders below the tolerances used downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from cmaxwell import defaults as dflt
from cmaxwell.errors import EvaluationFailure, NewtonDivergence, RankDrift, UnresolvedMultipliers

EPS = np.finfo(float).eps
STEP_SCALE = EPS ** 0.2

PhaseFunction = Callable[[float, np.ndarray, np.ndarray], float]


# numerical differentiation --------------------------------------------------

def _step(x: float) -> float:
    h = STEP_SCALE * max(1.0, abs(x))
    return (x + h) - x


def _checked(value) -> float:
    value = float(value)
    if not np.isfinite(value):
        raise EvaluationFailure(f"function returned non-finite value {value}")
    return value


def gradient(f: Callable[[np.ndarray], float], x) -> np.ndarray:
    """Five-point central-difference gradient of a scalar function."""
    x = np.array(x, dtype=float)
    out = np.empty_like(x)
    for i in range(x.size):
        h = _step(x[i])
        vals = []
        for s in (2, 1, -1, -2):
            xs = x.copy()
            xs[i] += s * h
            vals.append(_checked(f(xs)))
        out[i] = (-vals[0] + 8 * vals[1] - 8 * vals[2] + vals[3]) / (12 * h)
    return out


def jacobian(F: Callable[[np.ndarray], np.ndarray], x) -> np.ndarray:
    """Five-point Jacobian ``J[i, j] = dF_i / dx_j`` of a vector function."""
    x = np.array(x, dtype=float)
    cols = []
    for j in range(x.size):
        h = _step(x[j])
        vals = []
        for s in (2, 1, -1, -2):
            xs = x.copy()
            xs[j] += s * h
            v = np.asarray(F(xs), dtype=float)
            if not np.all(np.isfinite(v)):
                raise EvaluationFailure("vector function returned non-finite values")
            vals.append(v)
        cols.append((-vals[0] + 8 * vals[1] - 8 * vals[2] + vals[3]) / (12 * h))
    return np.stack(cols, axis=-1)


def phase_gradient(f: PhaseFunction, t, q, p):
    """Return ``(df/dq, df/dp)`` at a phase-space point."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    n = q.size
    g = gradient(lambda z: f(t, z[:n], z[n:]), np.concatenate([q, p]))
    return g[:n], g[n:]


# data types -------------------------------------------------------------------

@dataclass
class LagrangianSystem:
    """A Lagrangian ``L(t, q, qdot)`` on an ``dim``-dimensional configuration space."""

    dim: int
    lagrangian: Callable[[float, np.ndarray, np.ndarray], float]
    name: str = "lagrangian"

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ValueError("dim must be >= 1")
        self.dim = int(self.dim)

    def __call__(self, t, q, qdot) -> float:
        return _checked(self.lagrangian(t, np.asarray(q, float), np.asarray(qdot, float)))

    def momenta(self, t, q, qdot) -> np.ndarray:
        q = np.asarray(q, float)
        return gradient(lambda v: self(t, q, v), qdot)


@dataclass
class Constraint:
    func: PhaseFunction
    kind: str = "primary"
    label: str = ""

    def __call__(self, t, q, p) -> float:
        return _checked(self.func(t, np.asarray(q, float), np.asarray(p, float)))


@dataclass
class ConstraintSet:
    """Constraint functions ``phi^a(t, q, p)`` with their classification."""

    constraints: list = field(default_factory=list)
    tolerance: float = dflt.CONSTRAINT_TOL

    def __len__(self):
        return len(self.constraints)

    def __iter__(self):
        return iter(self.constraints)

    def __getitem__(self, i):
        return self.constraints[i]

    def values(self, t, q, p) -> np.ndarray:
        return np.array([c(t, q, p) for c in self.constraints])

    def on_surface(self, t, q, p) -> bool:
        return bool(np.all(np.abs(self.values(t, q, p)) <= self.tolerance)) if self.constraints else True

    def kinds(self) -> list:
        return [c.kind for c in self.constraints]

    def extended(self, more) -> "ConstraintSet":
        return ConstraintSet(list(self.constraints) + list(more), self.tolerance)


@dataclass
class SingularityReport:
    rank: int
    is_singular: bool
    null_basis: np.ndarray
    range_basis: np.ndarray


@dataclass
class ConstrainedHamiltonian:
    """Canonical Hamiltonian with its constraints.

    ``multipliers`` is ``None`` (unresolved), a fixed vector, or a callable
    ``(t, q, p) -> lambda``.
    """

    hamiltonian: PhaseFunction
    constraints: ConstraintSet
    multipliers: object = None
    system: Optional[LagrangianSystem] = None
    velocities: Optional[Callable] = None
    rank: Optional[int] = None

    def __call__(self, t, q, p) -> float:
        return _checked(self.hamiltonian(t, np.asarray(q, float), np.asarray(p, float)))

    def with_multipliers(self, multipliers) -> "ConstrainedHamiltonian":
        return replace(self, multipliers=multipliers)

    def with_resolved_multipliers(self, arbitrary: Optional[float] = None, tol: float = dflt.BRACKET_RTOL):
        """Multipliers re-solved at every state by the consistency condition.

        Multipliers left free by the consistency condition raise
        ``UnresolvedMultipliers`` unless ``arbitrary`` supplies a value for
        them (a gauge choice).
        """

        def resolve(t, q, p):
            res = consistency_resolve(self, t, q, p, tol=tol, detect_secondary=False)
            lam = res.lambdas.copy()
            if np.any(res.arbitrary):
                if arbitrary is None:
                    raise UnresolvedMultipliers(
                        f"multipliers {np.flatnonzero(res.arbitrary).tolist()} are not fixed by consistency")
                lam[res.arbitrary] = arbitrary
            return lam

        return replace(self, multipliers=resolve)


# operations -------------------------------------------------------------------

def velocity_hessian(sys: LagrangianSystem, t, q, qdot) -> np.ndarray:
    """``W_ij = d^2 L / dqdot_i dqdot_j``, symmetrized."""
    q = np.asarray(q, float)
    W = jacobian(lambda v: sys.momenta(t, q, v), qdot)
    return 0.5 * (W + W.T)


def singularity_report(W, tol: float = dflt.HESSIAN_RTOL, atol: float = 0.0) -> SingularityReport:
    """Rank, singularity flag and an orthonormal kernel basis of ``W``.

    Eigenvalues of the symmetric matrix below ``max(tol * ||W||_2, atol)``
    count as zero. ``atol`` is the noise floor of a numerically
    differentiated Hessian; without it a zero Hessian reads as full rank.
    """
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    evals, evecs = np.linalg.eigh(0.5 * (W + W.T))
    norm = np.max(np.abs(evals)) if n else 0.0
    if norm == 0.0:
        keep = np.zeros(n, dtype=bool)
    else:
        keep = np.abs(evals) > max(tol * norm, atol)
    rank = int(np.count_nonzero(keep))
    return SingularityReport(rank=rank, is_singular=rank < n,
                             null_basis=evecs[:, ~keep], range_basis=evecs[:, keep])


def _subspace_gap(A: np.ndarray, B: np.ndarray) -> float:
    if A.shape[1] != B.shape[1]:
        return np.inf
    if A.shape[1] == 0:
        return 0.0
    return float(np.linalg.norm(A @ A.T - B @ B.T, 2))


def _check_constant_rank(sys, t, q, qdot, ref: SingularityReport, tol, atol, radius, points):
    offsets = np.linspace(-radius, radius, points)
    n = sys.dim
    base = np.concatenate([q, qdot])
    for axis in range(2 * n):
        for off in offsets:
            if off == 0.0:
                continue
            z = base.copy()
            z[axis] += off * max(1.0, abs(base[axis]))
            rep = singularity_report(velocity_hessian(sys, t, z[:n], z[n:]), tol, atol)
            if rep.rank != ref.rank:
                raise RankDrift(f"velocity Hessian rank changes from {ref.rank} to {rep.rank} "
                                f"near the expansion point (axis {axis}, offset {off:+.3g})")
            if _subspace_gap(rep.null_basis, ref.null_basis) > 1e-4:
                raise RankDrift("kernel of the velocity Hessian rotates near the expansion point")


def _solve_velocities(sys, t, q, p, R, v_kernel, u0, J0=None, max_iter=50, rtol=1e-11):
    """Damped Newton for the regular velocity components ``u``.

    ``J0`` (the reference Hessian restricted to the range) is used as the
    Jacobian while it keeps halving the residual; otherwise a fresh
    finite-difference Jacobian is taken. Quadratic Lagrangians converge in
    one step without any Jacobian evaluation.
    """
    if R.shape[1] == 0:
        return v_kernel.copy()

    def residual(u):
        v = R @ u + v_kernel
        return R.T @ (sys.momenta(t, q, v) - p)

    u = np.array(u0, dtype=float)
    r = residual(u)
    scale = max(1.0, np.max(np.abs(p)))
    J, fresh = J0, J0 is None
    for _ in range(max_iter):
        if np.max(np.abs(r)) <= rtol * scale:
            return R @ u + v_kernel
        if J is None:
            J, fresh = jacobian(residual, u), True
        try:
            du = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError as exc:
            raise NewtonDivergence("singular Jacobian in velocity solve", float(np.max(np.abs(r)))) from exc
        step = 1.0
        r_norm = np.max(np.abs(r))
        while True:
            trial = residual(u + step * du)
            if np.max(np.abs(trial)) < r_norm or step < 1e-6:
                break
            step *= 0.5
        u = u + step * du
        r = trial
        if np.max(np.abs(r)) > 0.5 * r_norm:
            if fresh:
                break  # no progress with a fresh Jacobian: differentiation noise floor
            J = None
    if np.max(np.abs(r)) <= 1e3 * rtol * scale:
        return R @ u + v_kernel
    raise NewtonDivergence(f"velocity solve did not converge, residual {np.max(np.abs(r)):.3e}",
                           float(np.max(np.abs(r))))


def legendre_transform(sys: LagrangianSystem, t, q, qdot_seed, tol: float = dflt.HESSIAN_RTOL,
                       atol: float = dflt.HESSIAN_ATOL, probe_radius: float = dflt.RANK_PROBE_RADIUS,
                       probe_points: int = dflt.RANK_PROBE_POINTS,
                       constraint_tolerance: float = dflt.CONSTRAINT_TOL) -> ConstrainedHamiltonian:
    """Legendre transform with primary-constraint extraction.

    The Hessian at ``(q, qdot_seed)`` fixes the regular subspace (its range)
    and the kernel. Rank and kernel are checked constant on ``probe_points``
    probes per axis of ``(q, qdot)``. Velocities along the range are solved
    from ``p`` by damped Newton starting at the seed; kernel velocity
    components are set to zero, so the returned ``H`` is the canonical one
    with no multiplier term. ``atol`` (scaled by ``max(1, |L|)``) is the
    absolute floor below which Hessian eigenvalues count as zero. Each kernel direction ``n_a`` gives the primary
    constraint ``phi^a = n_a . (p - dL/dqdot)``, which cannot depend on the
    velocities when the kernel is constant.
    """
    q0 = np.asarray(q, dtype=float)
    seed = np.asarray(qdot_seed, dtype=float)
    W = velocity_hessian(sys, t, q0, seed)
    atol = atol * max(1.0, abs(sys(t, q0, seed)))
    ref = singularity_report(W, tol, atol)
    _check_constant_rank(sys, t, q0, seed, ref, tol, atol, probe_radius, probe_points)
    R, N = ref.range_basis, ref.null_basis
    u_seed = R.T @ seed
    v_zero = np.zeros(sys.dim)
    J0 = R.T @ W @ R

    def velocities(t_, q_, p_):
        return _solve_velocities(sys, t_, np.asarray(q_, float), np.asarray(p_, float), R, v_zero, u_seed, J0)

    def hamiltonian(t_, q_, p_):
        v = velocities(t_, q_, p_)
        return float(np.dot(p_, v) - sys(t_, q_, v))

    def make_constraint(a):
        n_a = N[:, a].copy()

        def phi(t_, q_, p_):
            v = R @ u_seed
            return float(n_a @ (np.asarray(p_, float) - sys.momenta(t_, q_, v)))

        return Constraint(phi, kind="primary", label=f"primary[{a}]")

    constraints = ConstraintSet([make_constraint(a) for a in range(N.shape[1])], constraint_tolerance)
    return ConstrainedHamiltonian(hamiltonian, constraints, None, sys, velocities, ref.rank)


def poisson_bracket(f: PhaseFunction, g: PhaseFunction, t, q, p) -> float:
    """``[f, g] = df/dq . dg/dp - df/dp . dg/dq``."""
    fq, fp = phase_gradient(f, t, q, p)
    gq, gp = phase_gradient(g, t, q, p)
    return float(fq @ gp - fp @ gq)


def _bracket_matrix(fs_grad, gs_grad):
    return np.array([[fq @ gp - fp @ gq for (gq, gp) in gs_grad] for (fq, fp) in fs_grad])


def constrained_rhs(ch: ConstrainedHamiltonian, t, q, p, lambdas=None):
    """Constrained Hamilton vector field.

    ``qdot = dH/dp + lambda_a dphi^a/dp``, ``pdot = -dH/dq - lambda_a dphi^a/dq``.
    """
    q = np.asarray(q, float)
    p = np.asarray(p, float)
    Hq, Hp = phase_gradient(ch.hamiltonian, t, q, p)
    qdot, pdot = Hp.copy(), -Hq
    m = len(ch.constraints)
    if m == 0:
        return qdot, pdot
    lam = lambdas if lambdas is not None else ch.multipliers
    if callable(lam):
        lam = lam(t, q, p)
    if lam is None:
        raise UnresolvedMultipliers("constraints present but no multipliers supplied")
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (m,) or not np.all(np.isfinite(lam)):
        raise UnresolvedMultipliers(f"need {m} finite multipliers, got {lam}")
    for a, c in enumerate(ch.constraints):
        cq, cp = phase_gradient(c, t, q, p)
        qdot += lam[a] * cp
        pdot -= lam[a] * cq
    return qdot, pdot


@dataclass
class ConsistencyResult:
    lambdas: np.ndarray
    arbitrary: np.ndarray
    new_constraints: list
    bracket_matrix: np.ndarray
    drift: np.ndarray

    @property
    def all_fixed(self) -> bool:
        return not bool(np.any(self.arbitrary))


def project_to_surface(constraints: ConstraintSet, t, q, p, max_iter: int = 30, tol: float = 1e-12):
    """Minimum-norm Gauss-Newton projection of ``(q, p)`` onto the constraint surface."""
    q = np.array(q, float)
    p = np.array(p, float)
    if not len(constraints):
        return q, p
    n = q.size
    z = np.concatenate([q, p])

    def phis(zz):
        return constraints.values(t, zz[:n], zz[n:])

    for _ in range(max_iter):
        r = phis(z)
        if np.max(np.abs(r)) <= tol * max(1.0, np.max(np.abs(z))):
            break
        J = jacobian(phis, z)
        z = z - np.linalg.lstsq(J, r, rcond=None)[0]
    return z[:n], z[n:]


def consistency_resolve(ch: ConstrainedHamiltonian, t, q, p, tol: float = dflt.BRACKET_RTOL,
                        abs_tol: float = dflt.BRACKET_ATOL, chain_tol: float = dflt.CHAIN_TOL,
                        probes: int = dflt.CHAIN_PROBES, probe_radius: float = dflt.CHAIN_PROBE_RADIUS, seed: int = 0,
                        detect_secondary: bool = True) -> ConsistencyResult:
    """Dirac consistency ``[phi^a, H] + lambda_b [phi^a, phi^b] ~ 0``.

    ``C_ab = [phi^a, phi^b]`` is solved against ``-[phi^a, H]`` by least
    squares. Singular values below ``max(tol * ||C||, abs_tol)`` span the
    kernel; multipliers with a component in the kernel are flagged
    arbitrary. For each kernel direction ``k`` the function
    ``chi = k_a [phi^a, H]`` is a secondary constraint unless it vanishes at
    the point and at ``probes`` random points projected onto the current
    constraint surface (to ``chain_tol``).
    """
    q = np.asarray(q, float)
    p = np.asarray(p, float)
    m = len(ch.constraints)
    if m == 0:
        return ConsistencyResult(np.zeros(0), np.zeros(0, bool), [], np.zeros((0, 0)), np.zeros(0))
    grads = [phase_gradient(c, t, q, p) for c in ch.constraints]
    H_grad = phase_gradient(ch.hamiltonian, t, q, p)
    C = _bracket_matrix(grads, grads)
    C = 0.5 * (C - C.T)
    b = _bracket_matrix(grads, [H_grad])[:, 0]

    U, s, Vt = np.linalg.svd(C)
    cnorm = s[0] if s.size else 0.0
    thresh = max(tol * cnorm, abs_tol)
    keep = s > thresh
    lam = np.zeros(m)
    for i in np.flatnonzero(keep):
        lam -= (U[:, i] @ b) / s[i] * Vt[i]
    kernel = Vt[~keep].T  # columns span ker C (right kernel; C antisymmetric)
    arbitrary = np.linalg.norm(kernel, axis=1) > 1e-8 if kernel.size else np.zeros(m, bool)

    new = []
    if detect_secondary and kernel.size:
        constraints = list(ch.constraints)
        rng = np.random.default_rng(seed)
        points = [(q, p)]
        for _ in range(probes):
            dq = rng.uniform(-1, 1, q.size) * probe_radius * np.maximum(1.0, np.abs(q))
            dp = rng.uniform(-1, 1, p.size) * probe_radius * np.maximum(1.0, np.abs(p))
            points.append(project_to_surface(ch.constraints, t, q + dq, p + dp))
        for j in range(kernel.shape[1]):
            k = kernel[:, j].copy()

            def chi(t_, q_, p_, k=k):
                return float(sum(k[a] * poisson_bracket(constraints[a].func, ch.hamiltonian, t_, q_, p_)
                                 for a in range(m) if k[a] != 0.0))

            vals = [abs(chi(t, qq, pp)) for qq, pp in points]
            if max(vals) > chain_tol:
                new.append(Constraint(chi, kind="secondary", label=f"secondary[{j}]"))
    return ConsistencyResult(lam, arbitrary, new, C, b)


def constraint_chain(ch: ConstrainedHamiltonian, t, q, p, max_depth: int = 4, **kwargs):
    """Iterate consistency until no new constraints appear.

    Returns ``(final ConstrainedHamiltonian, last ConsistencyResult)``. The
    state is projected onto each enlarged surface before the next round.
    """
    current = ch
    q = np.asarray(q, float)
    p = np.asarray(p, float)
    for _ in range(max_depth):
        res = consistency_resolve(current, t, q, p, **kwargs)
        if not res.new_constraints:
            return current, res
        current = replace(current, constraints=current.constraints.extended(res.new_constraints))
        q, p = project_to_surface(current.constraints, t, q, p)
    return current, consistency_resolve(current, t, q, p, **kwargs)


def integrate_constrained(ch: ConstrainedHamiltonian, t_span: Sequence[float], q0, p0,
                          t_eval=None, rtol: float = 1e-11, atol: float = 1e-12):
    """Integrate the constrained flow with an adaptive 8th-order Runge-Kutta."""
    from scipy.integrate import solve_ivp

    n = len(q0)

    def f(t, z):
        qd, pd = constrained_rhs(ch, t, z[:n], z[n:])
        return np.concatenate([qd, pd])

    sol = solve_ivp(f, t_span, np.concatenate([q0, p0]), method="DOP853", t_eval=t_eval,
                    rtol=rtol, atol=atol)
    if not sol.success:
        raise EvaluationFailure(sol.message)
    return sol.t, sol.y[:n].T, sol.y[n:].T
