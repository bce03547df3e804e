"""Trajectory energy: time integral of joint torque times angular velocity."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import ArmParams, inverse_dynamics, inverse_dynamics_split
from .trajectory import JointState, JointTrajectory

QUADRATURE_STEP = 0.01
POWER_MODES = ("abs", "clamp")


@dataclass(frozen=True)
class EnergyReport:
    total_energy: float
    per_joint_energy: tuple[float, float, float]
    quadrature_step: float


def joint_power(tau: np.ndarray, qdot: np.ndarray, power_mode: str = "abs") -> np.ndarray:
    """Per-joint power drawn by the actuators.

    ``abs`` charges braking work as consumed energy (no regeneration);
    ``clamp`` ignores it.
    """
    p = tau * qdot
    if power_mode == "abs":
        return np.abs(p)
    if power_mode == "clamp":
        return np.maximum(p, 0.0)
    raise ValueError(f"unknown power_mode {power_mode!r}; expected one of {POWER_MODES}")


def instantaneous_power(params: ArmParams, state: JointState, power_mode: str = "abs") -> np.ndarray:
    tau = inverse_dynamics(params, state.q, state.qdot, state.qddot)
    return joint_power(tau, np.asarray(state.qdot, dtype=float), power_mode)


def simpson_weights(num_samples: int, step: float) -> np.ndarray:
    n = num_samples - 1
    if n < 2 or n % 2:
        raise ValueError(f"composite Simpson needs an even number of intervals, got {n}")
    w = np.full(num_samples, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return w * (step / 3.0)


def _panels(power: np.ndarray):
    """Interpolating quadratics of each Simpson panel and their roots.

    Returns ``(coeffs, breaks)``: ``q(s) = a s^2 + b s + c`` on ``s`` in
    ``[0, 2]`` (units of step) and breakpoints ``0 <= lo <= hi <= 2`` such that
    ``q`` keeps one sign on each of ``[0, lo]``, ``[lo, hi]``, ``[hi, 2]``.
    """
    n = power.shape[-1] - 1
    if n < 2 or n % 2:
        raise ValueError(f"composite Simpson needs an even number of intervals, got {n}")
    p0, p1, p2 = power[..., 0:-1:2], power[..., 1::2], power[..., 2::2]
    a = 0.5 * (p0 - 2.0 * p1 + p2)
    b = 0.5 * (-3.0 * p0 + 4.0 * p1 - p2)
    c = p0
    with np.errstate(divide="ignore", invalid="ignore"):
        disc = b * b - 4.0 * a * c
        root = np.sqrt(np.where(disc >= 0.0, disc, np.nan))
        qq = -0.5 * (b + np.where(b >= 0.0, root, -root))
        r1 = np.where(a != 0.0, qq / a, np.nan)
        r2 = np.where(qq != 0.0, c / qq, np.nan)
    r1 = np.where((r1 > 0.0) & (r1 < 2.0), r1, 0.0)
    r2 = np.where((r2 > 0.0) & (r2 < 2.0), r2, 0.0)
    lo, hi = np.minimum(r1, r2), np.maximum(r1, r2)
    lo = np.where(lo == 0.0, hi, lo)
    return (a, b, c), (np.zeros_like(lo), lo, hi, np.full_like(lo, 2.0))


def _piece_factors(coeffs, breaks, power_mode: str):
    """Per-piece signed integrals of ``q`` and the factor applied to each."""
    if power_mode not in POWER_MODES:
        raise ValueError(f"unknown power_mode {power_mode!r}; expected one of {POWER_MODES}")
    a, b, c = coeffs

    def F(s):
        return ((a / 3.0 * s + 0.5 * b) * s + c) * s

    vals = [F(breaks[k + 1]) - F(breaks[k]) for k in range(3)]
    if power_mode == "abs":
        return vals, [np.sign(v) for v in vals]
    return vals, [(v > 0.0).astype(float) for v in vals]


def integrate_power(power: np.ndarray, step: float, power_mode: str = "abs") -> np.ndarray:
    """Integral of ``|p|`` (or ``max(p, 0)``) for signed power sampled along the last axis.

    Each Simpson panel is replaced by the exact integral of the rectified
    interpolating quadratic, split at its roots.  Panels without a sign change
    reproduce composite Simpson; panels with one avoid the kink error.
    """
    coeffs, breaks = _panels(power)
    vals, factors = _piece_factors(coeffs, breaks, power_mode)
    total = sum(f * v for f, v in zip(factors, vals))
    return step * total.sum(axis=-1)


# Antiderivatives of the Lagrange basis on nodes s = 0, 1, 2.
_LAGRANGE_PRIMITIVES = (
    lambda s: s ** 3 / 6.0 - 0.75 * s ** 2 + s,
    lambda s: -s ** 3 / 3.0 + s ** 2,
    lambda s: s ** 3 / 6.0 - 0.25 * s ** 2,
)


def power_weights(power: np.ndarray, step: float, power_mode: str = "abs") -> np.ndarray:
    """Derivative of :func:`integrate_power` with respect to each sample.

    The rectified integrand vanishes at the moving roots, so only the sign
    pattern of each piece matters.  Reduces to Simpson weights times
    ``sign(p)`` away from sign changes.
    """
    coeffs, breaks = _panels(power)
    _, factors = _piece_factors(coeffs, breaks, power_mode)
    w = np.zeros_like(power, dtype=float)
    for i, prim in enumerate(_LAGRANGE_PRIMITIVES):
        d = sum(f * (prim(breaks[k + 1]) - prim(breaks[k])) for k, f in enumerate(factors))
        w[..., i::2][..., :d.shape[-1]] += step * d
    return w


def integrate_samples(values: np.ndarray, step: float, axis: int = -2) -> np.ndarray:
    """Composite Simpson integral of uniformly sampled ``values`` along ``axis``."""
    values = np.moveaxis(values, axis, -1)
    return values @ simpson_weights(values.shape[-1], step)


def energy_from_components(params: ArmParams, q, qdot, qddot, step: float,
                           power_mode: str = "abs") -> np.ndarray:
    """Per-joint energies from joint-major samples ``q[j][..., sample]``; shape ``(3, ...)``."""
    tau = inverse_dynamics_split(params, q, qdot, qddot)
    return np.stack([integrate_power(tau[j] * qdot[j], step, power_mode) for j in range(3)])


def energy_from_states(params: ArmParams, q: np.ndarray, qdot: np.ndarray, qddot: np.ndarray,
                       step: float, power_mode: str = "abs") -> np.ndarray:
    """Per-joint energies for uniformly sampled states ``(..., samples, 3)``; shape ``(..., 3)``."""
    tau = inverse_dynamics(params, q, qdot, qddot)
    return integrate_power(np.moveaxis(tau * qdot, -2, -1), step, power_mode)


def trajectory_energy(params: ArmParams, traj: JointTrajectory, step: float = QUADRATURE_STEP,
                      power_mode: str = "abs", interval: tuple[float, float] | None = None) -> EnergyReport:
    ta, tb = interval if interval is not None else (traj.grid.t0, traj.grid.tf)
    n = int(round((tb - ta) / step))
    if abs(n * step - (tb - ta)) > 1e-9:
        raise ValueError("interval length must be a multiple of the quadrature step")
    t = ta + step * np.arange(n + 1)
    state = traj.eval(t)
    per_joint = energy_from_states(params, state.q, state.qdot, state.qddot, step, power_mode)
    if not np.all(np.isfinite(per_joint)):
        raise FloatingPointError("non-finite power along trajectory")
    per_joint_t = tuple(float(e) for e in per_joint)
    return EnergyReport(float(np.sum(per_joint)), per_joint_t, step)  # type: ignore[arg-type]
