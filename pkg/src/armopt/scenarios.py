"""Canonical pick-and-place scenarios and the before/after energy experiment."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constraints import (
    DEFAULT_PRECISION,
    ObstacleClearance,
    PrecisionWaypoint,
    TorqueLimit,
    WorkspaceReach,
    reach_violation,
)
from .dynamics import ArmParams, end_effector
from .energy import trajectory_energy
from .sip_solver import SolverConfig, SolverReport, local_reduction_solve
from .trajectory import JOINT_LIMIT, JointTrajectory, KnotGrid, baseline_trajectory

REACH_SLACK = 1e-9


class UnreachableError(ValueError):
    pass


TOOL_ANGLE = math.pi / 2


def inverse_kinematics(params: ArmParams, point, tool_angle: float = TOOL_ANGLE) -> np.ndarray:
    """Elbow-down joint angles placing the end effector at ``point``.

    The last link points along ``tool_angle`` (absolute, default straight up)
    and the elbow sits below the base-to-wrist line (``q2 >= 0``).  If that
    wrist position is out of range, tool angles are tried at growing offsets
    of 1 degree, alternating +/-.
    """
    x, y = (float(v) for v in point)
    L1, L2, L3 = params.link_lengths
    offsets = [0.0]
    for k in range(1, 181):
        offsets += [math.radians(k), -math.radians(k)]
    for off in offsets:
        phi = tool_angle + off
        wx, wy = x - L3 * math.cos(phi), y - L3 * math.sin(phi)
        c2 = (wx * wx + wy * wy - L1 * L1 - L2 * L2) / (2.0 * L1 * L2)
        if -1.0 <= c2 <= 1.0:
            q2 = math.acos(c2)
            q1 = math.atan2(wy, wx) - math.atan2(L2 * math.sin(q2), L1 + L2 * math.cos(q2))
            q = np.array([q1, q2, phi - q1 - q2])
            return (q + np.pi) % (2.0 * np.pi) - np.pi
    raise UnreachableError(f"no inverse-kinematics solution for point {tuple(point)}")


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    arm: ArmParams
    grid: KnotGrid
    start_q: tuple[float, float, float]
    goal_point: tuple[float, float]
    goal_q: tuple[float, float, float] | None = None
    via: tuple[PrecisionWaypoint, ...] = ()
    obstacles: tuple[ObstacleClearance, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "start_q", tuple(float(v) for v in self.start_q))
        object.__setattr__(self, "goal_point", tuple(float(v) for v in self.goal_point))
        if self.goal_q is None:
            try:
                goal_q = tuple(float(v) for v in inverse_kinematics(self.arm, self.goal_point))
            except UnreachableError:
                goal_q = None  # reported by validate_scenario
            object.__setattr__(self, "goal_q", goal_q)
        else:
            object.__setattr__(self, "goal_q", tuple(float(v) for v in self.goal_q))
        object.__setattr__(self, "via", tuple(self.via))
        object.__setattr__(self, "obstacles", tuple(self.obstacles))

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return (self.name, self.arm, self.grid, self.start_q, self.goal_point, self.goal_q,
                self.via, self.obstacles) == (other.name, other.arm, other.grid, other.start_q,
                                              other.goal_point, other.goal_q, other.via, other.obstacles)

    __hash__ = None

    def continuous_specs(self) -> list:
        """Time-indexed families in catalog order; list position is the family id."""
        return [TorqueLimit(self.arm.torque_limits), *self.obstacles]

    def via_configurations(self) -> list[tuple[float, np.ndarray]]:
        return [(w.time, inverse_kinematics(self.arm, w.target)) for w in self.via]

    def baseline(self) -> JointTrajectory:
        if self.goal_q is None:
            raise UnreachableError(f"goal {self.goal_point} has no joint configuration")
        return baseline_trajectory(self.start_q, self.goal_q, self.via_configurations(), self.grid)


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str


def validate_scenario(scenario: Scenario) -> list[Violation]:
    """Structured list of problems; empty when the scenario is usable."""
    out: list[Violation] = []
    arm, grid = scenario.arm, scenario.grid
    targets = [("goal", scenario.goal_point)] + [(f"via[{i}]", w.target) for i, w in enumerate(scenario.via)]
    for label, p in targets:
        if reach_violation(arm, WorkspaceReach(p)) > -REACH_SLACK:
            out.append(Violation("reach", f"{label} target {tuple(p)} is beyond the arm reach "
                                          f"{arm.total_length:g} m"))
    times = [w.time for w in scenario.via]
    for i, t in enumerate(times):
        if not grid.t0 < t <= grid.tf:
            out.append(Violation("waypoint_time", f"via[{i}] time {t} not in ({grid.t0}, {grid.tf}]"))
    if any(b <= a for a, b in zip(times, times[1:])):
        out.append(Violation("waypoint_order", "via waypoint times must be strictly increasing"))
    for label, q in (("start_q", scenario.start_q), ("goal_q", scenario.goal_q)):
        if q is not None and np.any(np.abs(q) > JOINT_LIMIT):
            out.append(Violation("joint_range", f"{label} outside [-pi, pi]"))
    if scenario.goal_q is not None:
        err = np.linalg.norm(end_effector(arm, scenario.goal_q) - np.asarray(scenario.goal_point))
        if err > DEFAULT_PRECISION:
            out.append(Violation("goal_mismatch", f"goal_q places the end effector {err:.3g} m from goal_point"))
    for i, obs in enumerate(scenario.obstacles):
        for t in (grid.t0, grid.tf):
            c = obs.center_at(t)
            if np.hypot(*c) <= obs.radius:
                out.append(Violation("base_collision", f"obstacles[{i}] covers the arm base at t={t}"))
                break
    return out


CANONICAL_START = (-math.pi / 3, math.pi / 4, math.pi / 6)
CANONICAL_GOAL = (1.6, 0.8)
CANONICAL_VIA = PrecisionWaypoint(time=18.0, target=(1.9, 0.75), tolerance=DEFAULT_PRECISION)


def builtin_scenarios() -> list[Scenario]:
    arm = ArmParams()
    grid = KnotGrid(0.0, 30.0, 1.0)
    common = dict(arm=arm, grid=grid, start_q=CANONICAL_START, goal_point=CANONICAL_GOAL,
                  via=(CANONICAL_VIA,))
    return [
        Scenario(name="no-obstacles", **common),
        Scenario(name="static-obstacles",
                 obstacles=(ObstacleClearance(center=(1.2, 0.3), radius=0.2),), **common),
        Scenario(name="moving-obstacles",
                 obstacles=(ObstacleClearance(center=(1.8, -0.2), radius=0.2, velocity=(-0.04, 0.02)),),
                 **common),
    ]


def get_scenario(name: str) -> Scenario:
    for sc in builtin_scenarios():
        if sc.name == name:
            return sc
    raise KeyError(name)


@dataclass(frozen=True)
class ScenarioResult:
    name: str
    energy_before: float
    energy_after: float
    reduction_pct: float
    converged: bool
    report: SolverReport = field(repr=False, compare=False)
    baseline: JointTrajectory = field(repr=False, compare=False)
    optimized: JointTrajectory = field(repr=False, compare=False)


def reduction_percent(before: float, after: float) -> float:
    """Relative saving in percent; a zero-energy task reports 0."""
    if before == 0.0:
        return 0.0
    return 100.0 * (before - after) / before


def run_scenario(scenario: Scenario, config: SolverConfig = SolverConfig(),
                 power_mode: str = "abs") -> ScenarioResult:
    """Baseline energy, optimize, optimized energy."""
    baseline = scenario.baseline()
    before = trajectory_energy(scenario.arm, baseline, power_mode=power_mode).total_energy
    traj, report = local_reduction_solve(scenario.arm, baseline, scenario.continuous_specs(),
                                         scenario.via, config, power_mode)
    after = trajectory_energy(scenario.arm, traj, power_mode=power_mode).total_energy
    return ScenarioResult(scenario.name, before, after, reduction_percent(before, after),
                          report.converged, report, baseline, traj)
