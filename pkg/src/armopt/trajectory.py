"""Clamped cubic-spline joint trajectories and their decision-vector packing."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import NamedTuple, Sequence

import numpy as np
from numpy.typing import ArrayLike
from scipy.interpolate import CubicSpline

from .dynamics import NUM_JOINTS, DimensionError

JOINT_LIMIT = np.pi


class JointState(NamedTuple):
    q: np.ndarray
    qdot: np.ndarray
    qddot: np.ndarray


@dataclass(frozen=True)
class KnotGrid:
    t0: float = 0.0
    tf: float = 30.0
    knot_spacing: float = 1.0

    def __post_init__(self):
        if not self.tf > self.t0:
            raise ValueError("tf must exceed t0")
        if self.knot_spacing <= 0:
            raise ValueError("knot_spacing must be positive")
        n = (self.tf - self.t0) / self.knot_spacing
        if abs(n - round(n)) > 1e-9:
            raise ValueError("horizon must be an integer multiple of knot_spacing")

    @property
    def num_intervals(self) -> int:
        return int(round((self.tf - self.t0) / self.knot_spacing))

    @property
    def num_knots(self) -> int:
        return self.num_intervals + 1

    @property
    def knot_times(self) -> np.ndarray:
        return self.t0 + self.knot_spacing * np.arange(self.num_knots)

    def sample_times(self, step: float) -> np.ndarray:
        n = int(round((self.tf - self.t0) / step))
        return self.t0 + step * np.arange(n + 1)


@lru_cache(maxsize=8)
def _basis_spline(grid: KnotGrid) -> CubicSpline:
    # Clamped splines are linear in the knot values; splining the identity
    # gives one basis function per knot.
    return CubicSpline(grid.knot_times, np.eye(grid.num_knots), bc_type="clamped")


def spline_basis(grid: KnotGrid, times: ArrayLike) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Matrices ``B0, B1, B2`` (len(times) x num_knots) with ``q(t) = B0 @ knots`` etc."""
    spl = _basis_spline(grid)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    return spl(times), spl(times, 1), spl(times, 2)


@dataclass(frozen=True, eq=False)
class JointTrajectory:
    """Per-joint clamped cubic spline through ``knots`` (num_knots x 3, rad)."""

    grid: KnotGrid
    knots: np.ndarray

    @cached_property
    def spline(self) -> CubicSpline:
        return CubicSpline(self.grid.knot_times, self.knots, bc_type="clamped")

    def eval(self, t: ArrayLike) -> JointState:
        t_arr = np.asarray(t, dtype=float)
        tol = 1e-9
        if np.any(t_arr < self.grid.t0 - tol) or np.any(t_arr > self.grid.tf + tol):
            raise ValueError(f"t outside horizon [{self.grid.t0}, {self.grid.tf}]")
        t_arr = np.clip(t_arr, self.grid.t0, self.grid.tf)
        s = self.spline
        return JointState(s(t_arr), s(t_arr, 1), s(t_arr, 2))

    def __eq__(self, other):
        if not isinstance(other, JointTrajectory):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.knots, other.knots)

    __hash__ = None


def fit_spline(grid: KnotGrid, knots: ArrayLike) -> JointTrajectory:
    knots = np.array(knots, dtype=float)
    if knots.shape != (grid.num_knots, NUM_JOINTS):
        raise DimensionError(f"knots must have shape {(grid.num_knots, NUM_JOINTS)}, got {knots.shape}")
    if not np.all(np.isfinite(knots)):
        raise ValueError("knots must be finite")
    knots.setflags(write=False)
    return JointTrajectory(grid, knots)


def pack(traj: JointTrajectory) -> np.ndarray:
    """Interior knots flattened row-major: entry ``i * 3 + j`` is knot ``i + 1``, joint ``j``."""
    return traj.knots[1:-1].reshape(-1).copy()


def unpack(x: ArrayLike, template: JointTrajectory) -> JointTrajectory:
    x = np.asarray(x, dtype=float)
    n_int = template.grid.num_knots - 2
    if x.shape != (n_int * NUM_JOINTS,):
        raise DimensionError(f"decision vector must have length {n_int * NUM_JOINTS}, got {x.shape}")
    knots = template.knots.copy()
    knots[1:-1] = x.reshape(n_int, NUM_JOINTS)
    return fit_spline(template.grid, knots)


def baseline_trajectory(start_q: ArrayLike, goal_q: ArrayLike,
                        via: Sequence[tuple[float, ArrayLike]] = (),
                        grid: KnotGrid = KnotGrid()) -> JointTrajectory:
    """Unoptimized reference motion.

    Knots are linear in joint space between consecutive waypoints
    ``(t0, start), (t_via, q_via)..., (tf, goal)`` and then spline-fitted.
    """
    times = [grid.t0] + [float(t) for t, _ in via] + [grid.tf]
    configs = [np.asarray(start_q, float)] + [np.asarray(q, float) for _, q in via] + [np.asarray(goal_q, float)]
    if np.any(np.diff(times) <= 0):
        raise ValueError("waypoint times must be strictly increasing inside the horizon")
    configs = np.array(configs)
    kt = grid.knot_times
    knots = np.column_stack([np.interp(kt, times, configs[:, j]) for j in range(NUM_JOINTS)])
    return fit_spline(grid, knots)
