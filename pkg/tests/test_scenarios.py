"""Scenario catalog, validation, and pinned before/after energies."""
import json
import math
from pathlib import Path

import numpy as np
import pytest

from armopt.constraints import ObstacleClearance, PrecisionWaypoint, max_violation_over_time
from armopt.dynamics import end_effector, forward_kinematics
from armopt.energy import trajectory_energy
from armopt.scenarios import (
    TOOL_ANGLE,
    Scenario,
    UnreachableError,
    builtin_scenarios,
    get_scenario,
    inverse_kinematics,
    reduction_percent,
    run_scenario,
    validate_scenario,
)
from armopt.trajectory import KnotGrid

GOLDEN = json.loads((Path(__file__).parent / "golden" / "energies.json").read_text())


def test_catalog_order_and_validity():
    scs = builtin_scenarios()
    assert [s.name for s in scs] == ["no-obstacles", "static-obstacles", "moving-obstacles"]
    for sc in scs:
        assert validate_scenario(sc) == []
    assert builtin_scenarios()[1] == scs[1]


def test_inverse_kinematics_reaches_target(arm):
    for point in [(1.6, 0.8), (1.9, 0.75), (0.5, -1.2)]:
        q = inverse_kinematics(arm, point)
        np.testing.assert_allclose(end_effector(arm, q), point, atol=1e-12)
        assert q[1] >= 0.0  # elbow down
    q = inverse_kinematics(arm, (1.6, 0.8))
    assert sum(q) == pytest.approx(TOOL_ANGLE, abs=1e-12)


def test_inverse_kinematics_unreachable(arm):
    with pytest.raises(UnreachableError):
        inverse_kinematics(arm, (5.0, 0.0))


def test_goal_configuration_within_joint_range():
    for sc in builtin_scenarios():
        assert np.all(np.abs(sc.goal_q) <= math.pi)
        np.testing.assert_allclose(end_effector(sc.arm, sc.goal_q), sc.goal_point, atol=1e-9)


def test_static_obstacle_blocks_baseline():
    sc = get_scenario("static-obstacles")
    _, g = max_violation_over_time(sc.obstacles[0], sc.arm, sc.baseline())
    assert g > 0


def test_no_obstacle_baseline_is_feasible():
    sc = get_scenario("no-obstacles")
    base = sc.baseline()
    for spec in sc.continuous_specs():
        assert max_violation_over_time(spec, sc.arm, base)[1] <= 0
    np.testing.assert_allclose(base.eval(sc.via[0].time).q,
                               inverse_kinematics(sc.arm, sc.via[0].target), atol=1e-12)


def test_unreachable_target_reported(arm):
    sc = Scenario("far", arm, KnotGrid(), (0, 0, 0), (1.0, 0.0), goal_q=(0.0, 0.0, 0.0),
                  via=(PrecisionWaypoint(10.0, (10.0, 0.0)),))
    kinds = [v.kind for v in validate_scenario(sc)]
    assert "reach" in kinds


def test_obstacle_over_base_reported(arm):
    sc = Scenario("base", arm, KnotGrid(), (0, 0, 0), (1.6, 0.8),
                  obstacles=(ObstacleClearance((0.1, 0.0), 0.5),))
    assert [v.kind for v in validate_scenario(sc)] == ["base_collision"]


def test_waypoint_order_reported(arm):
    sc = Scenario("order", arm, KnotGrid(), (0, 0, 0), (1.6, 0.8),
                  via=(PrecisionWaypoint(20.0, (1.0, 1.0)), PrecisionWaypoint(10.0, (1.0, 0.5))))
    assert "waypoint_order" in [v.kind for v in validate_scenario(sc)]


def test_degenerate_task_reports_zero(arm):
    q = tuple(float(v) for v in inverse_kinematics(arm, (1.0, 1.0)))
    sc = Scenario("still", arm, KnotGrid(), q, (1.0, 1.0))
    res = run_scenario(sc)
    assert res.energy_before == 0.0 and res.energy_after == 0.0 and res.reduction_pct == 0.0
    assert reduction_percent(0.0, 0.0) == 0.0


def test_baseline_energy_golden():
    for sc in builtin_scenarios():
        E = trajectory_energy(sc.arm, sc.baseline()).total_energy
        assert E == pytest.approx(GOLDEN[sc.name]["energy_before_J"], rel=1e-9)


@pytest.mark.parametrize("name", ["no-obstacles", "static-obstacles", "moving-obstacles"])
def test_results_match_golden(shipped_runs, name):
    res, _ = shipped_runs[name]
    gold = GOLDEN[name]
    assert res.energy_after == pytest.approx(gold["energy_after_J"], rel=1e-6)
    assert res.reduction_pct == pytest.approx(gold["reduction_pct"], abs=1e-4)
    assert res.report.outer_iters == gold["outer_iters"]
    assert res.reduction_pct == pytest.approx(
        100 * (res.energy_before - res.energy_after) / res.energy_before, abs=1e-9)
    assert res.reduction_pct >= 0


def test_link_geometry_stays_clear_of_static_obstacle(shipped_runs):
    res, _ = shipped_runs["static-obstacles"]
    sc = get_scenario("static-obstacles")
    t = res.optimized.grid.sample_times(0.01)
    pts = forward_kinematics(sc.arm, res.optimized.eval(t).q)
    # Joint positions alone never enter the obstacle disc.
    assert np.min(np.linalg.norm(pts - np.array(sc.obstacles[0].center), axis=-1)) > sc.obstacles[0].radius
