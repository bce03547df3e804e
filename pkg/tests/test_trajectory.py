"""Spline trajectory: reproduction, derivatives, packing."""
import numpy as np
import pytest

from armopt.dynamics import DimensionError
from armopt.trajectory import KnotGrid, baseline_trajectory, fit_spline, pack, spline_basis, unpack

GRID = KnotGrid(0.0, 30.0, 1.0)


def smoothstep(t, T=30.0):
    s = t / T
    return 3 * s ** 2 - 2 * s ** 3, (6 * s - 6 * s ** 2) / T, (6 - 12 * s) / T ** 2


def cubic_traj():
    kt = GRID.knot_times
    p = smoothstep(kt)[0]
    knots = np.column_stack([p, -2 * p + 0.5, 0.3 * p - 1.0])
    return fit_spline(GRID, knots)


def test_grid_dimensions():
    assert GRID.num_knots == 31
    traj = cubic_traj()
    assert pack(traj).shape == (87,)


def test_constant_knots_give_rest():
    traj = fit_spline(GRID, np.tile([0.2, -0.4, 1.0], (31, 1)))
    st = traj.eval(np.linspace(0, 30, 301))
    np.testing.assert_allclose(st.q, np.tile([0.2, -0.4, 1.0], (301, 1)), atol=1e-14)
    np.testing.assert_allclose(st.qdot, 0.0, atol=1e-14)
    np.testing.assert_allclose(st.qddot, 0.0, atol=1e-14)


def test_reproduces_clamped_cubic():
    traj = cubic_traj()
    t = np.linspace(0, 30, 3001)
    p, dp, ddp = smoothstep(t)
    st = traj.eval(t)
    scale = np.array([1.0, -2.0, 0.3])
    np.testing.assert_allclose(st.q, np.outer(p, scale) + [0, 0.5, -1.0], atol=1e-9)
    np.testing.assert_allclose(st.qdot, np.outer(dp, scale), atol=1e-9)
    np.testing.assert_allclose(st.qddot, np.outer(ddp, scale), atol=1e-9)


def test_interpolates_knots_and_is_clamped(rng):
    knots = rng.uniform(-1, 1, (31, 3))
    traj = fit_spline(GRID, knots)
    np.testing.assert_allclose(traj.eval(GRID.knot_times).q, knots, atol=1e-12)
    np.testing.assert_allclose(traj.eval(0.0).qdot, 0.0, atol=1e-12)
    np.testing.assert_allclose(traj.eval(30.0).qdot, 0.0, atol=1e-12)


def test_velocity_matches_central_difference(rng):
    traj = fit_spline(GRID, rng.uniform(-1, 1, (31, 3)))
    h = 1e-6
    for t in rng.uniform(0.5, 29.5, 20):
        fd = (traj.eval(t + h).q - traj.eval(t - h).q) / (2 * h)
        v = traj.eval(t).qdot
        assert np.linalg.norm(fd - v) <= 1e-5 * np.linalg.norm(v)


def test_eval_outside_horizon_raises():
    with pytest.raises(ValueError):
        cubic_traj().eval(31.0)


def test_spline_basis_is_linear_in_knots(rng):
    knots = rng.uniform(-1, 1, (31, 3))
    traj = fit_spline(GRID, knots)
    t = rng.uniform(0, 30, 25)
    B0, B1, B2 = spline_basis(GRID, t)
    st = traj.eval(t)
    np.testing.assert_allclose(B0 @ knots, st.q, atol=1e-12)
    np.testing.assert_allclose(B1 @ knots, st.qdot, atol=1e-12)
    np.testing.assert_allclose(B2 @ knots, st.qddot, atol=1e-12)


def test_pack_unpack_round_trip(rng):
    traj = fit_spline(GRID, rng.uniform(-1, 1, (31, 3)))
    back = unpack(pack(traj), traj)
    np.testing.assert_array_equal(back.knots, traj.knots)
    with pytest.raises(DimensionError):
        unpack(np.zeros(86), traj)


def test_unpack_is_local(rng):
    traj = fit_spline(GRID, rng.uniform(-1, 1, (31, 3)))
    x = pack(traj)
    i, j = 11, 2
    x[i * 3 + j] += 0.25
    changed = unpack(x, traj).knots != traj.knots
    assert changed.sum() == 1 and changed[i + 1, j]


def test_baseline_straight_move():
    start, goal = np.array([0.1, 0.2, 0.3]), np.array([-1.0, 1.0, 0.5])
    traj = baseline_trajectory(start, goal, grid=GRID)
    s = GRID.knot_times / 30.0
    np.testing.assert_allclose(traj.knots, start + np.outer(s, goal - start), atol=1e-14)


def test_baseline_passes_through_via():
    via_q = np.array([0.5, 0.5, 0.5])
    traj = baseline_trajectory(np.zeros(3), np.ones(3), via=[(12.0, via_q)], grid=GRID)
    np.testing.assert_allclose(traj.eval(12.0).q, via_q, atol=1e-12)
    with pytest.raises(ValueError):
        baseline_trajectory(np.zeros(3), np.ones(3), via=[(31.0, via_q)], grid=GRID)


def test_start_equals_goal_is_constant():
    traj = baseline_trajectory(np.ones(3), np.ones(3), grid=GRID)
    assert np.all(traj.knots == 1.0)
