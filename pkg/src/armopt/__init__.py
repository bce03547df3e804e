"""Energy-optimal trajectories for a planar three-link arm via a local reduction method."""
from .dynamics import ArmParams
from .scenarios import Scenario, ScenarioResult, builtin_scenarios, get_scenario, run_scenario
from .sip_solver import SolverConfig, local_reduction_solve
from .trajectory import JointTrajectory, KnotGrid

__all__ = [
    "ArmParams",
    "JointTrajectory",
    "KnotGrid",
    "Scenario",
    "ScenarioResult",
    "SolverConfig",
    "builtin_scenarios",
    "get_scenario",
    "local_reduction_solve",
    "run_scenario",
]
