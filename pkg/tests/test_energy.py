"""Energy quadrature against rectangle and fine-trapezoid oracles."""
import numpy as np
import pytest
from scipy.integrate import trapezoid

from armopt.dynamics import ArmParams, inverse_dynamics
from armopt.energy import (
    energy_from_states,
    instantaneous_power,
    joint_power,
    simpson_weights,
    trajectory_energy,
)
from armopt.scenarios import get_scenario
from armopt.trajectory import JointState, KnotGrid, baseline_trajectory


def constant_power_case():
    """Joint 1 spins the straight arm at 1 rad/s against 2 N*m s/rad of friction."""
    arm = ArmParams(gravity_accel=0.0, joint_viscous_friction=(2.0, 0.0, 0.0))
    t = np.linspace(0.0, 30.0, 3001)
    q = np.column_stack([t, np.zeros_like(t), np.zeros_like(t)])
    qd = np.column_stack([np.ones_like(t), np.zeros_like(t), np.zeros_like(t)])
    return arm, q, qd, np.zeros_like(q)


def trapezoid_oracle(params, traj, h):
    t = np.linspace(traj.grid.t0, traj.grid.tf, int(round((traj.grid.tf - traj.grid.t0) / h)) + 1)
    st = traj.eval(t)
    p = np.abs(inverse_dynamics(params, st.q, st.qdot, st.qddot) * st.qdot).sum(axis=1)
    return float(trapezoid(p, t))


def test_power_at_rest_is_zero(arm):
    st = JointState(np.array([0.4, 0.1, -0.2]), np.zeros(3), np.zeros(3))
    np.testing.assert_array_equal(instantaneous_power(arm, st), 0.0)


def test_power_matches_direct_composition(arm, rng):
    q, qd, qdd = rng.normal(size=(3, 50, 3))
    p = instantaneous_power(arm, JointState(q, qd, qdd))
    np.testing.assert_allclose(p, np.abs(inverse_dynamics(arm, q, qd, qdd) * qd), atol=1e-12)


def test_power_modes():
    tau, w = np.array([2.0, -3.0, 1.0]), np.array([1.0, 1.0, 0.0])
    np.testing.assert_array_equal(joint_power(tau, w, "abs"), [2.0, 3.0, 0.0])
    np.testing.assert_array_equal(joint_power(tau, w, "clamp"), [2.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        joint_power(tau, w, "net")


def test_constant_power_rectangle():
    arm, q, qd, qdd = constant_power_case()
    per_joint = energy_from_states(arm, q, qd, qdd, 0.01)
    assert per_joint.sum() == pytest.approx(60.0, abs=1e-10)
    np.testing.assert_allclose(per_joint[1:], 0.0, atol=1e-12)


def test_simpson_weights_exact_for_cubics():
    t = np.linspace(0, 2, 21)
    assert simpson_weights(21, 0.1) @ t ** 3 == pytest.approx(4.0, abs=1e-13)
    with pytest.raises(ValueError):
        simpson_weights(20, 0.1)


def test_constant_trajectory_has_zero_energy(arm):
    traj = baseline_trajectory(np.ones(3), np.ones(3), grid=KnotGrid())
    assert trajectory_energy(arm, traj).total_energy == 0.0


def test_baseline_matches_fine_trapezoid():
    sc = get_scenario("no-obstacles")
    traj = sc.baseline()
    E = trajectory_energy(sc.arm, traj).total_energy
    oracle = trapezoid_oracle(sc.arm, traj, 1e-4)
    assert abs(E - oracle) <= 1e-6 * oracle


def test_energy_is_additive_over_intervals():
    sc = get_scenario("no-obstacles")
    traj = sc.baseline()
    whole = trajectory_energy(sc.arm, traj).total_energy
    parts = sum(trajectory_energy(sc.arm, traj, interval=iv).total_energy for iv in ((0, 12), (12, 30)))
    assert parts == pytest.approx(whole, rel=1e-9)


def test_per_joint_sums_to_total():
    sc = get_scenario("no-obstacles")
    rep = trajectory_energy(sc.arm, sc.baseline())
    assert sum(rep.per_joint_energy) == pytest.approx(rep.total_energy, rel=1e-12)
    assert rep.quadrature_step == 0.01


def test_clamp_never_exceeds_abs():
    sc = get_scenario("no-obstacles")
    traj = sc.baseline()
    assert (trajectory_energy(sc.arm, traj, power_mode="clamp").total_energy
            <= trajectory_energy(sc.arm, traj).total_energy)
