"""Constraint families ``g(x, t) <= 0`` and the search for their worst time."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from numpy.typing import ArrayLike

from .dynamics import ArmParams, end_effector, inverse_dynamics, link_segments
from .trajectory import JointTrajectory

SCAN_STEP = 0.05
TIME_RESOLUTION = 1e-4
DEFAULT_PRECISION = 1e-3
DEFAULT_CLEARANCE = 0.05

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def _point(p) -> tuple[float, float]:
    x, y = (float(v) for v in p)
    return (x, y)


@dataclass(frozen=True)
class TorqueLimit:
    limits: tuple[float, float, float]

    def __post_init__(self):
        object.__setattr__(self, "limits", tuple(float(v) for v in self.limits))
        if len(self.limits) != 3 or min(self.limits) <= 0:
            raise ValueError("torque limits must be three positive values")


@dataclass(frozen=True)
class ObstacleClearance:
    """Circle moving linearly: ``center(t) = center + velocity * (t - t_ref)``."""

    center: tuple[float, float]
    radius: float
    margin: float = DEFAULT_CLEARANCE
    velocity: tuple[float, float] = (0.0, 0.0)
    t_ref: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "center", _point(self.center))
        object.__setattr__(self, "velocity", _point(self.velocity))
        if self.radius <= 0:
            raise ValueError("obstacle radius must be positive")
        if self.margin < 0:
            raise ValueError("clearance margin must be non-negative")

    def center_at(self, t: ArrayLike) -> np.ndarray:
        t = np.asarray(t, dtype=float)[..., None]
        return np.asarray(self.center) + np.asarray(self.velocity) * (t - self.t_ref)


@dataclass(frozen=True)
class PrecisionWaypoint:
    time: float
    target: tuple[float, float]
    tolerance: float = DEFAULT_PRECISION

    def __post_init__(self):
        object.__setattr__(self, "target", _point(self.target))
        if self.tolerance <= 0:
            raise ValueError("waypoint tolerance must be positive")


@dataclass(frozen=True)
class WorkspaceReach:
    target: tuple[float, float]

    def __post_init__(self):
        object.__setattr__(self, "target", _point(self.target))


ConstraintSpec = Union[TorqueLimit, ObstacleClearance, PrecisionWaypoint, WorkspaceReach]
CONTINUOUS_FAMILIES = (TorqueLimit, ObstacleClearance)


class ConstraintIndexSet:
    """Finite exchange set of ``(family id, time)`` pairs, kept in insertion order."""

    def __init__(self, pairs=(), resolution: float = 1e-6):
        self.resolution = resolution
        self._pairs: list[tuple[int, float]] = []
        for fam, t in pairs:
            self.add(fam, t)

    def add(self, family: int, t: float) -> bool:
        """Insert a pair; returns False if an equivalent pair is already present."""
        if self.contains(family, t):
            return False
        self._pairs.append((int(family), float(t)))
        return True

    def contains(self, family: int, t: float) -> bool:
        return any(f == family and abs(s - t) <= self.resolution for f, s in self._pairs)

    def times_for(self, family: int) -> list[float]:
        return [t for f, t in self._pairs if f == family]

    def __iter__(self):
        return iter(self._pairs)

    def __len__(self):
        return len(self._pairs)

    def copy(self) -> "ConstraintIndexSet":
        return ConstraintIndexSet(self._pairs, self.resolution)


def segment_point_distance(segment: ArrayLike, point: ArrayLike) -> np.ndarray:
    """Distance from ``point`` to the closest point on ``segment`` (shape ``(..., 2, 2)``)."""
    seg = np.asarray(segment, dtype=float)
    p = np.asarray(point, dtype=float)
    a, b = seg[..., 0, :], seg[..., 1, :]
    ab = b - a
    ap = p - a
    denom = np.sum(ab * ab, axis=-1)
    safe = np.where(denom > 0.0, denom, 1.0)
    s = np.clip(np.sum(ap * ab, axis=-1) / safe, 0.0, 1.0)
    s = np.where(denom > 0.0, s, 0.0)
    closest = a + s[..., None] * ab
    return np.linalg.norm(p - closest, axis=-1)


def torque_violation(params: ArmParams, limits, q, qdot, qddot) -> np.ndarray:
    tau = inverse_dynamics(params, q, qdot, qddot)
    return np.max(np.abs(tau) - np.asarray(limits), axis=-1)


def obstacle_violation(params: ArmParams, spec: ObstacleClearance, q, t) -> np.ndarray:
    segs = link_segments(params, q)
    center = spec.center_at(t)[..., None, :]
    dist = np.min(segment_point_distance(segs, center), axis=-1)
    return spec.radius + spec.margin - dist


def precision_violation(params: ArmParams, spec: PrecisionWaypoint, q) -> np.ndarray:
    err = end_effector(params, q) - np.asarray(spec.target)
    return np.linalg.norm(err, axis=-1) - spec.tolerance


def reach_violation(params: ArmParams, spec: WorkspaceReach) -> float:
    return float(np.hypot(*spec.target) - params.total_length)


def violation(spec: ConstraintSpec, params: ArmParams, traj: JointTrajectory, t: ArrayLike = None):
    """Constraint value at time(s) ``t``; feasible where ``<= 0``."""
    if isinstance(spec, WorkspaceReach):
        return reach_violation(params, spec)
    if isinstance(spec, PrecisionWaypoint):
        return precision_violation(params, spec, traj.eval(spec.time).q)[()]
    if t is None:
        raise ValueError("continuous constraint families need a time")
    state = traj.eval(t)
    if isinstance(spec, TorqueLimit):
        return torque_violation(params, spec.limits, state.q, state.qdot, state.qddot)[()]
    if isinstance(spec, ObstacleClearance):
        return obstacle_violation(params, spec, state.q, t)[()]
    raise TypeError(f"unknown constraint variant {type(spec).__name__}")


def golden_section_max(fn: Callable[[float], float], a: float, b: float,
                       tol: float = TIME_RESOLUTION) -> tuple[float, float]:
    """Maximize a locally unimodal ``fn`` on ``[a, b]`` until the bracket is under ``tol``."""
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = fn(d)
    return (c, fc) if fc >= fd else (d, fd)


def maximize_over_time(fn: Callable[[np.ndarray], np.ndarray], t0: float, tf: float,
                       scan_step: float = SCAN_STEP, tol: float = TIME_RESOLUTION) -> tuple[float, float]:
    """Dense scan followed by golden-section refinement around the best scan point.

    ``fn`` must accept an array of times.  The returned value is never below
    the scan maximum.
    """
    n = max(1, int(round((tf - t0) / scan_step)))
    grid = np.linspace(t0, tf, n + 1)
    values = np.asarray(fn(grid), dtype=float)
    i = int(np.argmax(values))
    best_t, best_g = float(grid[i]), float(values[i])
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, n)]
    t_ref, g_ref = golden_section_max(lambda s: float(fn(np.array([s]))[0]), float(lo), float(hi), tol)
    if g_ref > best_g:
        best_t, best_g = t_ref, g_ref
    return best_t, best_g


def max_violation_over_time(spec: ConstraintSpec, params: ArmParams, traj: JointTrajectory,
                            scan_step: float = SCAN_STEP) -> tuple[float, float]:
    if not isinstance(spec, CONTINUOUS_FAMILIES):
        raise TypeError("only continuous-time families can be maximized over time")
    return maximize_over_time(lambda t: violation(spec, params, traj, t),
                              traj.grid.t0, traj.grid.tf, scan_step)
