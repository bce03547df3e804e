"""Kinematics and Lagrangian dynamics of a planar 3R arm with uniform-rod links.

The arm moves in a vertical plane; gravity acts along -y.  Joint angles are
relative (``q``), absolute link angles are ``theta = cumsum(q)``.

All functions broadcast over leading dimensions: ``q`` may be ``(3,)`` or
``(..., 3)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike

NUM_JOINTS = 3

# Joint-to-absolute-angle map: theta = T @ q.
_T = np.tril(np.ones((NUM_JOINTS, NUM_JOINTS)))
# d(theta_a - theta_b)/dq_s
_DTHETA = (_T[:, None, :] - _T[None, :, :])


class DimensionError(ValueError):
    """An input vector does not have one entry per joint."""


class SingularMassMatrixError(np.linalg.LinAlgError):
    pass


def _as_vec(x: ArrayLike, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] != NUM_JOINTS:
        raise DimensionError(f"{name} must have trailing dimension {NUM_JOINTS}, got shape {arr.shape}")
    return arr


def _tuple3(values, name: str) -> tuple[float, float, float]:
    vals = tuple(float(v) for v in values)
    if len(vals) != NUM_JOINTS:
        raise DimensionError(f"{name} needs {NUM_JOINTS} entries, got {len(vals)}")
    return vals  # type: ignore[return-value]


@dataclass(frozen=True)
class ArmParams:
    """Geometry, inertia and actuator limits of the arm (SI units)."""

    link_lengths: tuple[float, float, float] = (1.0, 0.8, 0.6)
    link_masses: tuple[float, float, float] = (4.0, 3.0, 2.0)
    gravity_accel: float = 9.81
    torque_limits: tuple[float, float, float] = (120.0, 60.0, 30.0)
    joint_viscous_friction: tuple[float, float, float] = (0.0, 0.0, 0.0)
    num_joints: int = field(default=NUM_JOINTS)

    def __post_init__(self):
        object.__setattr__(self, "link_lengths", _tuple3(self.link_lengths, "link_lengths"))
        object.__setattr__(self, "link_masses", _tuple3(self.link_masses, "link_masses"))
        object.__setattr__(self, "torque_limits", _tuple3(self.torque_limits, "torque_limits"))
        object.__setattr__(
            self, "joint_viscous_friction", _tuple3(self.joint_viscous_friction, "joint_viscous_friction")
        )
        object.__setattr__(self, "gravity_accel", float(self.gravity_accel))
        if self.num_joints != NUM_JOINTS:
            raise ValueError(f"only {NUM_JOINTS}-joint arms are supported")
        if min(self.link_lengths) <= 0:
            raise ValueError("link lengths must be positive")
        if min(self.link_masses) <= 0:
            raise ValueError("link masses must be positive")
        if min(self.torque_limits) <= 0:
            raise ValueError("torque limits must be positive")
        if min(self.joint_viscous_friction) < 0:
            raise ValueError("friction coefficients must be non-negative")
        if not np.isfinite(self.gravity_accel):
            raise ValueError("gravity must be finite")

    @property
    def total_length(self) -> float:
        return float(sum(self.link_lengths))

    # Lumped inertial constants.  r[i, a] is the lever of link a's angle on
    # the centre of mass of link i: L_a for a < i, L_i / 2 for a == i.
    @property
    def _levers(self) -> np.ndarray:
        L = np.asarray(self.link_lengths)
        r = np.tril(np.broadcast_to(L, (NUM_JOINTS, NUM_JOINTS)), k=-1)
        return r + np.diag(L / 2.0)

    @property
    def coupling(self) -> np.ndarray:
        """G[a, b] = sum_i m_i r[i, a] r[i, b]; inertia in absolute angles is G * cos(theta_a - theta_b)."""
        m = np.asarray(self.link_masses)
        r = self._levers
        return np.einsum("i,ia,ib->ab", m, r, r)

    @property
    def rod_inertia(self) -> np.ndarray:
        return np.asarray(self.link_masses) * np.asarray(self.link_lengths) ** 2 / 12.0

    @property
    def gravity_moments(self) -> np.ndarray:
        """sum_i m_i r[i, a]: mass moment carried by absolute angle a."""
        return np.asarray(self.link_masses) @ self._levers


def absolute_angles(q: ArrayLike) -> np.ndarray:
    return np.cumsum(_as_vec(q, "q"), axis=-1)


def forward_kinematics(params: ArmParams, q: ArrayLike) -> np.ndarray:
    """Joint-origin chain ``p_0..p_3`` as an array of shape ``(..., 4, 2)``.

    ``p_0`` is the base at the origin and ``p_3`` the end effector.
    """
    th = absolute_angles(q)
    L = np.asarray(params.link_lengths)
    steps = np.stack([L * np.cos(th), L * np.sin(th)], axis=-1)
    pts = np.cumsum(steps, axis=-2)
    zero = np.zeros(pts.shape[:-2] + (1, 2))
    return np.concatenate([zero, pts], axis=-2)


def end_effector(params: ArmParams, q: ArrayLike) -> np.ndarray:
    return forward_kinematics(params, q)[..., -1, :]


def link_segments(params: ArmParams, q: ArrayLike) -> np.ndarray:
    """Segments ``(p_{i-1}, p_i)`` of shape ``(..., 3, 2, 2)``."""
    pts = forward_kinematics(params, q)
    return np.stack([pts[..., :-1, :], pts[..., 1:, :]], axis=-2)


def jacobian(params: ArmParams, q: ArrayLike) -> np.ndarray:
    """End-effector position Jacobian, shape ``(..., 2, 3)``."""
    th = absolute_angles(q)
    L = np.asarray(params.link_lengths)
    # Reverse cumulative sums give column i = sum_{j >= i} of the link terms.
    dx = np.flip(np.cumsum(np.flip(-L * np.sin(th), -1), -1), -1)
    dy = np.flip(np.cumsum(np.flip(L * np.cos(th), -1), -1), -1)
    return np.stack([dx, dy], axis=-2)


def _abs_inertia(params: ArmParams, th: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    diff = th[..., :, None] - th[..., None, :]
    G = params.coupling
    M_abs = G * np.cos(diff) + np.diag(params.rod_inertia)
    return M_abs, diff


def mass_matrix(params: ArmParams, q: ArrayLike) -> np.ndarray:
    """Joint-space inertia ``M(q)``, shape ``(..., 3, 3)``."""
    M_abs, _ = _abs_inertia(params, absolute_angles(q))
    return _T.T @ M_abs @ _T


def mass_matrix_derivatives(params: ArmParams, q: ArrayLike) -> np.ndarray:
    """``dM[..., k, l, s] = dM_kl / dq_s``."""
    th = absolute_angles(q)
    diff = th[..., :, None] - th[..., None, :]
    dM_abs = -(params.coupling * np.sin(diff))[..., None] * _DTHETA
    return np.einsum("ak,...abs,bl->...kls", _T, dM_abs, _T)


def coriolis_matrix(params: ArmParams, q: ArrayLike, qdot: ArrayLike) -> np.ndarray:
    """Coriolis/centrifugal matrix from Christoffel symbols of the first kind."""
    qdot = _as_vec(qdot, "qdot")
    dM = mass_matrix_derivatives(params, q)
    christoffel = 0.5 * (dM + np.swapaxes(dM, -1, -2) - np.moveaxis(dM, -1, -3))
    return np.einsum("...kls,...s->...kl", christoffel, qdot)


def potential_energy(params: ArmParams, q: ArrayLike) -> np.ndarray:
    th = absolute_angles(q)
    return params.gravity_accel * np.sum(params.gravity_moments * np.sin(th), axis=-1)


def kinetic_energy(params: ArmParams, q: ArrayLike, qdot: ArrayLike) -> np.ndarray:
    qdot = _as_vec(qdot, "qdot")
    M = mass_matrix(params, q)
    return 0.5 * np.einsum("...k,...kl,...l->...", qdot, M, qdot)


def gravity_vector(params: ArmParams, q: ArrayLike) -> np.ndarray:
    th = absolute_angles(q)
    g_abs = params.gravity_accel * params.gravity_moments * np.cos(th)
    return g_abs @ _T


def inverse_dynamics(params: ArmParams, q: ArrayLike, qdot: ArrayLike, qddot: ArrayLike) -> np.ndarray:
    """Joint torques ``M qddot + C qdot + g + friction * qdot``.

    Evaluated in absolute angles, where the velocity terms reduce to
    ``G_ab sin(theta_a - theta_b) thetadot_b**2``; this equals ``C(q, qdot) qdot``
    from :func:`coriolis_matrix` and is much cheaper on large batches.
    """
    q = _as_vec(q, "q")
    qdot = _as_vec(qdot, "qdot")
    qddot = _as_vec(qddot, "qddot")
    split = [np.moveaxis(v, -1, 0) for v in np.broadcast_arrays(q, qdot, qddot)]
    return np.stack(inverse_dynamics_split(params, *split), axis=-1)


def inverse_dynamics_split(params: ArmParams, q, qdot, qddot):
    """Inverse dynamics on joint-major components.

    ``q[j]``, ``qdot[j]``, ``qddot[j]`` are same-shaped arrays for joint ``j``;
    returns a list of three torque arrays.  Avoids ``(..., 3, 3)`` temporaries,
    which dominate the cost on large batches.
    """
    G = params.coupling
    I = params.rod_inertia
    gm = params.gravity_accel * params.gravity_moments
    th = [q[0], q[0] + q[1], q[0] + q[1] + q[2]]
    w = [qdot[0], qdot[0] + qdot[1], qdot[0] + qdot[1] + qdot[2]]
    a = [qddot[0], qddot[0] + qddot[1], qddot[0] + qddot[1] + qddot[2]]
    w2 = [wi * wi for wi in w]
    cos = [np.cos(t) for t in th]
    sin = [np.sin(t) for t in th]
    tau_abs = [gm[i] * cos[i] + (G[i, i] + I[i]) * a[i] for i in range(NUM_JOINTS)]
    for i in range(NUM_JOINTS):
        for j in range(i + 1, NUM_JOINTS):
            c = cos[i] * cos[j] + sin[i] * sin[j]
            s = sin[i] * cos[j] - cos[i] * sin[j]
            tau_abs[i] += G[i, j] * (c * a[j] + s * w2[j])
            tau_abs[j] += G[i, j] * (c * a[i] - s * w2[i])
    f = params.joint_viscous_friction
    tau3 = tau_abs[2]
    tau2 = tau_abs[1] + tau3
    tau1 = tau_abs[0] + tau2
    return [tau1 + f[0] * qdot[0], tau2 + f[1] * qdot[1], tau3 + f[2] * qdot[2]]


def forward_dynamics(params: ArmParams, q: ArrayLike, qdot: ArrayLike, tau: ArrayLike) -> np.ndarray:
    """Joint accelerations from applied torques (Cholesky solve on ``M(q)``)."""
    q = _as_vec(q, "q")
    qdot = _as_vec(qdot, "qdot")
    tau = _as_vec(tau, "tau")
    bias = inverse_dynamics(params, q, qdot, np.zeros_like(qdot))
    M = mass_matrix(params, q)
    rhs = tau - bias
    try:
        chol = np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise SingularMassMatrixError("mass matrix is not positive definite") from exc
    y = np.linalg.solve(chol, rhs[..., None])
    return np.linalg.solve(np.swapaxes(chol, -1, -2), y)[..., 0]


def mechanical_energy(params: ArmParams, q: ArrayLike, qdot: ArrayLike) -> np.ndarray:
    return kinetic_energy(params, q, qdot) + potential_energy(params, q)


class _ScalarModel:
    """Float-only forward dynamics for one state; numpy overhead dominates RK4 otherwise."""

    def __init__(self, params: ArmParams):
        self.G = params.coupling.tolist()
        self.I = params.rod_inertia.tolist()
        self.gm = (params.gravity_accel * params.gravity_moments).tolist()
        self.f = list(params.joint_viscous_friction)

    def accel(self, q, v, tau):
        G, I, gm = self.G, self.I, self.gm
        th = (q[0], q[0] + q[1], q[0] + q[1] + q[2])
        w = (v[0], v[0] + v[1], v[0] + v[1] + v[2])
        c = [[math.cos(th[a] - th[b]) for b in range(3)] for a in range(3)]
        Ma = [[G[a][b] * c[a][b] + (I[a] if a == b else 0.0) for b in range(3)] for a in range(3)]
        bias_abs = [
            sum(G[a][b] * math.sin(th[a] - th[b]) * w[b] * w[b] for b in range(3)) + gm[a] * math.cos(th[a])
            for a in range(3)
        ]
        bias = [bias_abs[0] + bias_abs[1] + bias_abs[2], bias_abs[1] + bias_abs[2], bias_abs[2]]
        rhs = [tau[k] - bias[k] - self.f[k] * v[k] for k in range(3)]
        # Joint-space M = T^T Ma T with T lower-triangular ones.
        S = [[sum(Ma[a][b] for a in range(k, 3) for b in range(l, 3)) for l in range(3)] for k in range(3)]
        # Cholesky S = R R^T, then two triangular solves.
        r00 = math.sqrt(S[0][0])
        r10 = S[1][0] / r00
        r20 = S[2][0] / r00
        d1 = S[1][1] - r10 * r10
        if d1 <= 0:
            raise SingularMassMatrixError("mass matrix is not positive definite")
        r11 = math.sqrt(d1)
        r21 = (S[2][1] - r20 * r10) / r11
        d2 = S[2][2] - r20 * r20 - r21 * r21
        if d2 <= 0:
            raise SingularMassMatrixError("mass matrix is not positive definite")
        r22 = math.sqrt(d2)
        y0 = rhs[0] / r00
        y1 = (rhs[1] - r10 * y0) / r11
        y2 = (rhs[2] - r20 * y0 - r21 * y1) / r22
        x2 = y2 / r22
        x1 = (y1 - r21 * x2) / r11
        x0 = (y0 - r10 * x1 - r20 * x2) / r00
        return (x0, x1, x2)


def simulate_rk4(params: ArmParams, q0: ArrayLike, qdot0: ArrayLike, duration: float,
                 dt: float, torque=None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Fixed-step RK4 integration of the forward dynamics.

    ``torque`` is an optional callable ``(t, q, qdot) -> tau``; zero torque if
    omitted.  Returns ``(t, q, qdot)`` sample arrays.
    """
    n = int(round(duration / dt))
    model = _ScalarModel(params)
    q = tuple(float(x) for x in _as_vec(q0, "q0"))
    v = tuple(float(x) for x in _as_vec(qdot0, "qdot0"))
    zero = (0.0, 0.0, 0.0)

    def accel(t, q, v):
        tau = zero if torque is None else tuple(torque(t, np.array(q), np.array(v)))
        return model.accel(q, v, tau)

    def axpy(a, x, y):
        return (y[0] + a * x[0], y[1] + a * x[1], y[2] + a * x[2])

    ts = np.arange(n + 1) * dt
    qs = np.empty((n + 1, NUM_JOINTS))
    vs = np.empty((n + 1, NUM_JOINTS))
    qs[0], vs[0] = q, v
    h2, h6 = 0.5 * dt, dt / 6.0
    for i in range(n):
        t = ts[i]
        a1 = accel(t, q, v)
        v2 = axpy(h2, a1, v)
        a2 = accel(t + h2, axpy(h2, v, q), v2)
        v3 = axpy(h2, a2, v)
        a3 = accel(t + h2, axpy(h2, v2, q), v3)
        v4 = axpy(dt, a3, v)
        a4 = accel(t + dt, axpy(dt, v3, q), v4)
        q = tuple(q[j] + h6 * (v[j] + 2 * v2[j] + 2 * v3[j] + v4[j]) for j in range(3))
        v = tuple(v[j] + h6 * (a1[j] + 2 * a2[j] + 2 * a3[j] + a4[j]) for j in range(3))
        qs[i + 1], vs[i + 1] = q, v
    return ts, qs, vs
