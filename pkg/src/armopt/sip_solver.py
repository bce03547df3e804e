"""Local reduction (exchange) method for the semi-infinite energy problem.

Outer loop: minimize a penalized energy over the finite index set ``Y_k``,
search each continuous constraint family for its worst time, add that time
to ``Y_k``, and stop once nothing is violated beyond tolerance.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, fields
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import line_search

from .constraints import (
    ConstraintIndexSet,
    ObstacleClearance,
    PrecisionWaypoint,
    TorqueLimit,
    max_violation_over_time,
    obstacle_violation,
    segment_point_distance,
    precision_violation,
    torque_violation,
)
from .dynamics import ArmParams, inverse_dynamics, inverse_dynamics_split, link_segments
from .energy import QUADRATURE_STEP, energy_from_components, power_weights, simpson_weights, trajectory_energy
from .trajectory import JOINT_LIMIT, JointTrajectory, pack, spline_basis, unpack

logger = logging.getLogger(__name__)

VERIFICATION_STEP = 0.01
MAX_PENALTY_ESCALATIONS = 5
# Ceiling on the penalty weight relative to its initial value.
MAX_PENALTY_RATIO = 1e6
# Normalized distance inside the feasible set beyond which a penalty term is
# treated as inactive when differencing.
INACTIVE_MARGIN = 1e-2


class SolverInconsistencyError(RuntimeError):
    """A trajectory reported as converged fails the dense verification."""


class LineSearchFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    violation_tolerance: float = 1e-6
    outer_max_iters: int = 50
    penalty_initial: float = 10.0
    penalty_growth: float = 10.0
    inner_max_iters: int = 500
    gradient_fd_step: float = 1e-6
    armijo_c: float = 1e-4
    armijo_backtrack: float = 0.5
    armijo_initial_step: float = 1e-2
    inner_grad_tolerance: float = 1e-5
    # Relative objective decrease over ``inner_stall_window`` iterations below
    # which the inner solve is considered finished.
    inner_stall_tolerance: float = 1e-5
    inner_stall_window: int = 10
    # Penalized constraints are tightened by this amount (constraint units) so
    # the penalty minimizer lands strictly inside the feasible set.
    penalty_backoff: float = 1e-3
    stagnation_tolerance: float = 1e-4
    stagnation_window: int = 3

    def __post_init__(self):
        if self.violation_tolerance <= 0:
            raise ValueError("violation_tolerance must be positive")
        if self.outer_max_iters < 1 or self.inner_max_iters < 1:
            raise ValueError("iteration counts must be at least 1")
        if self.penalty_growth <= 1:
            raise ValueError("penalty_growth must exceed 1")
        if self.penalty_initial <= 0 or self.gradient_fd_step <= 0:
            raise ValueError("penalty_initial and gradient_fd_step must be positive")
        if not 0 < self.armijo_backtrack < 1 or not 0 < self.armijo_c < 1:
            raise ValueError("armijo parameters out of range")

    @classmethod
    def field_types(cls) -> dict[str, type]:
        return {f.name: type(f.default) for f in fields(cls)}


@dataclass(frozen=True)
class IterationRecord:
    k: int
    index_set_size: int
    energy: float
    max_violation: float
    added_family: int | None
    added_time: float | None
    inner_iterations: int
    penalty: float


@dataclass
class SolverReport:
    iterations: list[IterationRecord] = field(default_factory=list)
    converged: bool = False
    total_inner_iterations: int = 0
    stop_reason: str = ""
    returned_incumbent: bool = False

    @property
    def outer_iters(self) -> int:
        return len(self.iterations)


@dataclass(frozen=True)
class ApproxResult:
    x: np.ndarray
    penalty: float
    iterations: int
    status: str
    inverse_hessian: np.ndarray | None = None


class ReducedProblem:
    """Energy and constraints as functions of the decision vector.

    Every method takes a batch ``X`` of shape ``(B, n)``.  ``energy_fn`` replaces
    the trajectory energy (used for analytic test problems).
    """

    def __init__(self, params: ArmParams, template: JointTrajectory, continuous_specs: Sequence,
                 waypoints: Sequence[PrecisionWaypoint] = (), power_mode: str = "abs",
                 energy_fn: Callable[[np.ndarray], np.ndarray] | None = None,
                 quadrature_step: float = QUADRATURE_STEP, backoff: float = 1e-3):
        self.params = params
        self.backoff = backoff
        self.template = template
        self.specs = list(continuous_specs)
        self.waypoints = list(waypoints)
        self.power_mode = power_mode
        self.energy_fn = energy_fn
        self.quadrature_step = quadrature_step
        self.grid = template.grid
        self.n = (self.grid.num_knots - 2) * 3
        self._energy_basis = None
        self._metric = None
        self._row_cache: dict[float, tuple[np.ndarray, ...]] = {}

    def knots(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        K = np.broadcast_to(self.template.knots, (X.shape[0],) + self.template.knots.shape).copy()
        K[:, 1:-1, :] = X.reshape(X.shape[0], -1, 3)
        return K

    def _states(self, times: Sequence[float], K: np.ndarray):
        missing = [t for t in times if t not in self._row_cache]
        if missing:
            b0, b1, b2 = spline_basis(self.grid, missing)
            for i, t in enumerate(missing):
                self._row_cache[t] = (b0[i], b1[i], b2[i])
        rows = [self._row_cache[t] for t in times]
        B = [np.array([r[d] for r in rows]) for d in range(3)]
        return tuple(np.einsum("tn,bnj->btj", b, K) for b in B)

    def energies(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        if self.energy_fn is not None:
            return np.asarray(self.energy_fn(X), dtype=float)
        if self._energy_basis is None:
            self._energy_basis = spline_basis(self.grid, self.grid.sample_times(self.quadrature_step))
        K = self.knots(X)
        # One GEMM per derivative order: rows are (joint, batch) pairs.
        Kt = K.transpose(2, 0, 1).reshape(-1, K.shape[1])
        q, qd, qdd = ((Kt @ b.T).reshape(3, K.shape[0], -1) for b in self._energy_basis)
        per_joint = energy_from_components(self.params, q, qd, qdd, self.quadrature_step, self.power_mode)
        return per_joint.sum(axis=0)

    def constraint_values(self, X: np.ndarray, index_set: ConstraintIndexSet) -> np.ndarray:
        """Smooth constraint components, shape ``(B, m)``.

        Each indexed torque time contributes ``+tau_j - limit_j`` and
        ``-tau_j - limit_j`` for every joint, each indexed obstacle time one
        clearance value per link, and each waypoint its precision value.  The
        maximum over a pair's components equals the family value, but the
        components themselves have no kinks, which keeps the penalty smooth.
        """
        X = np.atleast_2d(X)
        K = self.knots(X)
        cols = []
        for fam, spec in enumerate(self.specs):
            times = index_set.times_for(fam)
            if not times:
                continue
            if isinstance(spec, TorqueLimit):
                q, qd, qdd = self._states(times, K)
                tau = inverse_dynamics(self.params, q, qd, qdd)
                lim = np.asarray(spec.limits)
                cols += [(tau - lim).reshape(X.shape[0], -1), (-tau - lim).reshape(X.shape[0], -1)]
            elif isinstance(spec, ObstacleClearance):
                q, _, _ = self._states(times, K)
                segs = link_segments(self.params, q)
                center = spec.center_at(np.asarray(times))[..., None, :]
                dist = segment_point_distance(segs, center)
                cols.append((spec.radius + spec.margin - dist).reshape(X.shape[0], -1))
            else:
                raise TypeError(f"{type(spec).__name__} is not a continuous family")
        if self.waypoints:
            q, _, _ = self._states([w.time for w in self.waypoints], K)
            cols.append(np.stack([precision_violation(self.params, w, q[:, i])
                                  for i, w in enumerate(self.waypoints)], axis=-1))
        if not cols:
            return np.zeros((X.shape[0], 0))
        return np.concatenate(cols, axis=-1)

    def penalty_layout(self, index_set: ConstraintIndexSet) -> tuple[np.ndarray, np.ndarray]:
        """Per-column ``(shift, scale)`` matching :meth:`constraint_values`.

        Terms enter the penalty as ``((g + shift) / scale)_+ ** 2``: the shift
        pushes the penalty minimizer strictly inside the feasible set and the
        scale puts torques and distances on comparable footing.
        """
        shift, scale = [], []
        for fam, spec in enumerate(self.specs):
            n = len(index_set.times_for(fam))
            if isinstance(spec, TorqueLimit):
                shift += [self.backoff] * (6 * n)
                scale += [1.0] * (6 * n)
            else:
                shift += [self.backoff] * (3 * n)
                scale += [spec.margin if spec.margin > 0 else spec.radius] * (3 * n)
        for w in self.waypoints:
            shift.append(min(self.backoff, 0.5 * w.tolerance))
            scale.append(w.tolerance)
        return np.asarray(shift), np.asarray(scale)

    def penalty(self, X: np.ndarray, index_set: ConstraintIndexSet, mu: float) -> np.ndarray:
        g = self.constraint_values(X, index_set)
        if not g.shape[-1]:
            return np.zeros(g.shape[0])
        shift, scale = self.penalty_layout(index_set)
        return mu * np.sum(np.maximum(0.0, (g + shift) / scale) ** 2, axis=-1)

    def penalized(self, X: np.ndarray, index_set: ConstraintIndexSet, mu: float) -> np.ndarray:
        return self.energies(X) + self.penalty(X, index_set, mu)

    def energy_gradient(self, x: np.ndarray, step: float) -> np.ndarray:
        """Central-difference gradient of the energy.

        The knots-to-samples map is linear, so differences are taken on the
        nine state components at every sample and chained through the spline
        basis: 18 dynamics evaluations per sample instead of ``2n``.
        """
        if self.energy_fn is not None:
            return fd_gradient(self.energy_fn, x, step)
        if self._energy_basis is None:
            self.energies(x[None])
        K = self.knots(x[None])[0]
        base = np.stack([(b @ K).T for b in self._energy_basis])  # (order, joint, samples)
        # Rows 0..5 perturb q (trig recomputed); rows 6..17 perturb qdot or
        # qddot and share the unperturbed angles through broadcasting.
        pq = np.broadcast_to(base[0], (6,) + base[0].shape).copy()  # (6, joint, samples)
        pv = np.broadcast_to(base[1:], (12,) + base[1:].shape).copy()  # (12, order-1, joint, samples)
        for j in range(3):
            pq[2 * j, j] += step
            pq[2 * j + 1, j] -= step
        for c in range(6):
            pv[2 * c].reshape(6, -1)[c] += step
            pv[2 * c + 1].reshape(6, -1)[c] -= step
        qd0, qdd0 = base[1][:, None], base[2][:, None]
        tau_q = inverse_dynamics_split(self.params, pq.transpose(1, 0, 2), qd0, qdd0)
        q0 = base[0][:, None]
        qd_v, qdd_v = pv[:, 0].transpose(1, 0, 2), pv[:, 1].transpose(1, 0, 2)
        tau_v = inverse_dynamics_split(self.params, q0, qd_v, qdd_v)
        # Signed per-joint power is smooth; the rectification enters through
        # the quadrature's sample weights.
        tau0 = inverse_dynamics_split(self.params, base[0], base[1], base[2])
        w = np.stack([power_weights(tau0[j] * base[1][j], self.quadrature_step, self.power_mode)
                      for j in range(3)])  # (joint, samples)
        power_q = sum(tau_q[j] * qd0[j] * w[j] for j in range(3))
        power_v = sum(tau_v[j] * qd_v[j] * w[j] for j in range(3))
        power = np.concatenate([power_q, power_v])
        dpower = (power[0::2] - power[1::2]) / (2.0 * step)  # (9, samples)
        # Rows of dpower are (order, joint) pairs; chain each through its basis.
        grad_knots = sum(dpower[3 * d:3 * d + 3] @ b for d, b in enumerate(self._energy_basis))
        return grad_knots.T[1:-1].reshape(-1)

    def penalized_gradient(self, x: np.ndarray, index_set: ConstraintIndexSet, mu: float,
                           step: float) -> np.ndarray:
        """Energy gradient plus the penalty gradient by the chain rule.

        Only the smooth constraint components are differenced; the outer
        ``max(0, .)**2`` is differentiated exactly.  Differencing the penalty
        itself would straddle its second-derivative jump whenever a stiff term
        sits within one step of activation.
        """
        grad = self.energy_gradient(x, step)
        if len(index_set) or self.waypoints:
            g = self.constraint_values(x[None], index_set)[0]
            shift, scale = self.penalty_layout(index_set)
            u = (g + shift) / scale
            # Terms this far inside the feasible set contribute nothing.
            active = u > -INACTIVE_MARGIN
            if np.any(active):
                n = x.size
                E = np.eye(n) * step
                vals = self.constraint_values(np.concatenate([x + E, x - E]), index_set)[:, active]
                jac = (vals[:n] - vals[n:]) / (2.0 * step)  # (n, active)
                weight = 2.0 * mu * np.maximum(u[active], 0.0) / scale[active]
                grad = grad + jac @ weight
        return grad

    def metric(self) -> np.ndarray | None:
        """Inverse of the knot-space Gram matrix of the accelerations.

        Energy is dominated by acceleration-driven torque, so this roughly
        equalizes the curvature of smooth and oscillatory knot perturbations.
        Normalized to unit largest eigenvalue; ``None`` with a custom energy.
        """
        if self.energy_fn is not None:
            return None
        if self._metric is None:
            t = self.grid.sample_times(self.quadrature_step)
            b2 = spline_basis(self.grid, t)[2]
            gram = (b2 * simpson_weights(t.size, self.quadrature_step)[:, None]).T @ b2
            inv = np.linalg.inv(gram[1:-1, 1:-1])
            inv /= np.linalg.eigvalsh(inv)[-1]
            # x is knot-major, joint-minor: the same metric for each joint.
            self._metric = np.kron(inv, np.eye(3))
        return self._metric

    def trajectory(self, x: np.ndarray) -> JointTrajectory:
        return unpack(x, self.template)


def fd_gradient(fun: Callable[[np.ndarray], np.ndarray], x: np.ndarray, step: float) -> np.ndarray:
    """Central differences, all ``2n`` perturbations evaluated as one batch."""
    n = x.size
    E = np.eye(n) * step
    vals = fun(np.concatenate([x + E, x - E]))
    return (vals[:n] - vals[n:]) / (2.0 * step)


def _minimize(fun, x0: np.ndarray, config: SolverConfig, grad=None,
              lower=-JOINT_LIMIT, upper=JOINT_LIMIT, H0: np.ndarray | None = None,
              metric: np.ndarray | None = None):
    """Projected BFGS; returns ``(x, iterations, status, H)``.

    Quasi-Newton steps use a Wolfe line search (``armijo_c`` as the
    sufficient-decrease constant) so curvature pairs stay informative; a step
    that would leave the box, or a failed Wolfe search, falls back to
    projected Armijo backtracking.  ``fun`` maps a batch of points to values;
    ``grad`` defaults to batched central differences of ``fun``.  ``H0``
    warm-starts the inverse Hessian estimate and the final estimate is
    returned for reuse.  ``metric`` is a fixed inverse-Hessian guess that
    seeds the estimate when ``H0`` is absent and shapes the steepest-descent
    fallback.
    """
    if grad is None:
        def grad(x):
            return fd_gradient(fun, x, config.gradient_fd_step)
    x = np.clip(np.asarray(x0, dtype=float), lower, upper)
    f = float(fun(x[None])[0])
    g = grad(x)
    if H0 is not None:
        H = H0.copy()
    else:
        H = None if metric is None else metric.copy()
    history = [f]
    status = "max_iters"
    it = 0
    for it in range(1, config.inner_max_iters + 1):
        if np.max(np.abs(g)) <= config.inner_grad_tolerance:
            status = "gradient"
            it -= 1
            break
        step = None if H is None else _wolfe(fun, grad, x, f, g, H, config, lower, upper)
        if step is None:
            try:
                x_new, f_new = _armijo(fun, x, f, g, H, config, lower, upper, metric)
            except LineSearchFailure:
                if H is None:
                    status = "line_search"
                    it -= 1
                    break
                H = None
                try:
                    x_new, f_new = _armijo(fun, x, f, g, None, config, lower, upper, metric)
                except LineSearchFailure:
                    status = "line_search"
                    it -= 1
                    break
            g_new = grad(x_new)
        else:
            x_new, f_new, g_new = step
        s, y = x_new - x, g_new - g
        sy = float(s @ y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            if H is None:
                M = np.eye(x.size) if metric is None else metric
                H = M * (sy / float(y @ M @ y))
            rho = 1.0 / sy
            V = np.eye(x.size) - rho * np.outer(s, y)
            H = V @ H @ V.T + rho * np.outer(s, s)
        x, f, g = x_new, f_new, g_new
        history.append(f)
        w = config.inner_stall_window
        if len(history) > w and history[-w - 1] - f <= config.inner_stall_tolerance * (1.0 + abs(f)):
            status = "stalled"
            break
    return x, it, status, H


def _wolfe(fun, grad, x, f, g, H, config: SolverConfig, lower, upper):
    """Wolfe step along the quasi-Newton direction, or None to fall back."""
    d = -(H @ g)
    if float(d @ g) >= 0:
        return None
    cache: dict[bytes, np.ndarray] = {}

    def value(z):
        if np.any(z < lower) or np.any(z > upper):
            return np.inf
        return float(fun(z[None])[0])

    def gradient(z):
        key = z.tobytes()
        if key not in cache:
            cache[key] = grad(z)
        return cache[key]

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        alpha, _, _, f_new, _, _ = line_search(value, gradient, x, d, gfk=g, old_fval=f,
                                               c1=config.armijo_c, c2=0.9, maxiter=20)
    if alpha is None or f_new is None or not np.isfinite(f_new):
        return None
    x_new = x + alpha * d
    if np.any(x_new < lower) or np.any(x_new > upper):
        return None
    return x_new, float(f_new), gradient(x_new)


def _armijo(fun, x, f, g, H, config: SolverConfig, lower, upper, metric=None):
    if H is None:
        d = -g if metric is None else -(metric @ g)
        alpha = config.armijo_initial_step
    else:
        d = -(H @ g)
        alpha = 1.0
        if float(d @ g) >= 0:
            raise LineSearchFailure("quasi-Newton direction is not a descent direction")
    for _ in range(60):
        x_new = np.clip(x + alpha * d, lower, upper)
        step = x_new - x
        decrease = float(g @ step)
        if decrease >= 0 or not np.any(step):
            break
        f_new = float(fun(x_new[None])[0])
        if f_new <= f + config.armijo_c * decrease:
            return x_new, f_new
        alpha *= config.armijo_backtrack
    raise LineSearchFailure("Armijo backtracking made no progress")


def _grow(mu: float, config: SolverConfig) -> float:
    return min(mu * config.penalty_growth, config.penalty_initial * MAX_PENALTY_RATIO)


def solve_approximating(problem: ReducedProblem, x_init: np.ndarray, index_set: ConstraintIndexSet,
                        config: SolverConfig, penalty: float | None = None,
                        inverse_hessian: np.ndarray | None = None) -> ApproxResult:
    """Minimize the penalized energy over the finite index set.

    The penalty weight grows (up to five times) while any indexed constraint
    is still violated beyond ``violation_tolerance`` at exit.
    """
    mu = config.penalty_initial if penalty is None else penalty
    x = np.asarray(x_init, dtype=float)
    total = 0
    status = ""
    H = inverse_hessian
    for escalation in range(MAX_PENALTY_ESCALATIONS + 1):
        x, its, status, H = _minimize(
            lambda X: problem.penalized(X, index_set, mu), x, config,
            grad=lambda z: problem.penalized_gradient(z, index_set, mu, config.gradient_fd_step),
            H0=H, metric=problem.metric())
        total += its
        g = problem.constraint_values(x[None], index_set)
        worst = float(g.max()) if g.size else -np.inf
        logger.debug("approximating solve: mu=%g iters=%d status=%s worst=%.3g", mu, its, status, worst)
        grown = _grow(mu, config)
        if worst <= config.violation_tolerance or escalation == MAX_PENALTY_ESCALATIONS or grown == mu:
            break
        mu = grown
    return ApproxResult(x, mu, total, status, H)


def solve_auxiliary(params: ArmParams, traj: JointTrajectory, specs: Sequence) -> tuple[int, float, float]:
    """Most violated ``(family id, time, value)`` over all continuous families.

    Ties go to the lowest family id, then the earliest time.
    """
    if not specs:
        raise ValueError("need at least one continuous constraint family")
    best = None
    for fam, spec in enumerate(specs):
        t, g = max_violation_over_time(spec, params, traj)
        if best is None or g > best[2]:
            best = (fam, t, g)
    return best


@dataclass(frozen=True)
class Verification:
    family_max: tuple[float, ...]
    family_argmax: tuple[float, ...]
    waypoint_values: tuple[float, ...]

    def worst_family(self) -> tuple[int, float, float]:
        fam = int(np.argmax(self.family_max))
        return fam, self.family_argmax[fam], self.family_max[fam]

    def feasible(self, tol: float) -> bool:
        ok_fam = max(self.family_max, default=-np.inf) <= tol
        ok_way = max(self.waypoint_values, default=-np.inf) <= 1e-8
        return ok_fam and ok_way


def verify(params: ArmParams, traj: JointTrajectory, specs: Sequence,
           waypoints: Sequence[PrecisionWaypoint] = (), step: float = VERIFICATION_STEP) -> Verification:
    """Dense check of every family on the verification grid and of every waypoint."""
    t = traj.grid.sample_times(step)
    state = traj.eval(t)
    fmax, fargs = [], []
    for spec in specs:
        if isinstance(spec, TorqueLimit):
            g = torque_violation(params, spec.limits, state.q, state.qdot, state.qddot)
        else:
            g = obstacle_violation(params, spec, state.q, t)
        i = int(np.argmax(g))
        fmax.append(float(g[i]))
        fargs.append(float(t[i]))
    wv = [float(precision_violation(params, w, traj.eval(w.time).q)) for w in waypoints]
    return Verification(tuple(fmax), tuple(fargs), tuple(wv))


def initial_index_set(specs: Sequence, t0: float, tf: float) -> ConstraintIndexSet:
    Y = ConstraintIndexSet()
    for fam in range(len(specs)):
        for t in (t0, 0.5 * (t0 + tf), tf):
            Y.add(fam, t)
    return Y


def local_reduction_solve(params: ArmParams, initial: JointTrajectory, specs: Sequence,
                          waypoints: Sequence[PrecisionWaypoint] = (),
                          config: SolverConfig = SolverConfig(), power_mode: str = "abs",
                          energy_fn=None) -> tuple[JointTrajectory, SolverReport]:
    """Run the exchange method from ``initial``; returns the trajectory and its report.

    ``initial`` fixes the boundary knots and serves as the starting point.  The
    best verified-feasible trajectory seen (including ``initial``) is kept and
    returned whenever the last iterate is worse or infeasible.
    """
    if not specs:
        raise ValueError("need at least one continuous constraint family")
    problem = ReducedProblem(params, initial, specs, waypoints, power_mode, energy_fn,
                             backoff=config.penalty_backoff)
    tol = config.violation_tolerance
    report = SolverReport()
    Y = initial_index_set(specs, initial.grid.t0, initial.grid.tf)

    def energy_of(traj, x):
        if energy_fn is not None:
            return float(problem.energies(x[None])[0])
        return trajectory_energy(params, traj, power_mode=power_mode).total_energy

    x = pack(initial)
    incumbent = None
    if verify(params, initial, specs, waypoints).feasible(tol):
        incumbent = (energy_of(initial, x), initial)

    mu = config.penalty_initial
    H = None
    traj = initial
    energies: list[float] = []
    for k in range(config.outer_max_iters):
        result = solve_approximating(problem, x, Y, config, mu, H)
        x, mu, H = result.x, result.penalty, result.inverse_hessian
        report.total_inner_iterations += result.iterations
        traj = problem.trajectory(x)
        energy = energy_of(traj, x)
        energies.append(energy)
        fam, t_star, g_star = solve_auxiliary(params, traj, specs)
        check = verify(params, traj, specs, waypoints)
        feasible = g_star <= tol and check.feasible(tol)
        if feasible and (incumbent is None or energy < incumbent[0]):
            incumbent = (energy, traj)

        added = None
        if g_star > tol:
            added = (fam, t_star)
        elif not feasible and check.worst_family()[2] > tol:
            # The scan missed a narrow peak that the verification grid caught.
            fam, t_star, _ = check.worst_family()
            added = (fam, t_star)
        if added is not None and not Y.add(*added):
            added = None
            mu = _grow(mu, config)
        elif not feasible and added is None:
            mu = _grow(mu, config)
        report.iterations.append(IterationRecord(
            k=k, index_set_size=len(Y), energy=energy, max_violation=g_star,
            added_family=None if added is None else added[0],
            added_time=None if added is None else added[1],
            inner_iterations=result.iterations, penalty=mu,
        ))
        logger.info("outer %d: |Y|=%d E=%.6g g*=%.3g status=%s", k, len(Y), energy, g_star, result.status)
        if feasible:
            report.converged = True
            report.stop_reason = "feasible"
            break
        w = config.stagnation_window
        if (incumbent is not None and len(energies) > w
                and abs(energies[-1] - energies[-w - 1]) <= config.stagnation_tolerance * abs(energies[-1])):
            report.converged = True
            report.stop_reason = "stagnation"
            break
    else:
        report.stop_reason = "max_outer_iters"

    final = traj
    final_energy = energies[-1] if energies else np.inf
    final_ok = verify(params, final, specs, waypoints).feasible(tol)
    if incumbent is not None and (not final_ok or incumbent[0] < final_energy):
        final = incumbent[1]
        report.returned_incumbent = final is not traj
    if report.converged and not verify(params, final, specs, waypoints).feasible(tol + 1e-8):
        raise SolverInconsistencyError("converged trajectory violates constraints on the verification grid")
    return final, report
