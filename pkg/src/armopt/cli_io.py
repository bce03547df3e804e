"""Command-line entry point, scenario JSON files, and CSV output."""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator
from threadpoolctl import threadpool_limits

from .constraints import ObstacleClearance, PrecisionWaypoint
from .dynamics import ArmParams, inverse_dynamics
from .energy import POWER_MODES, QUADRATURE_STEP, joint_power, trajectory_energy
from .scenarios import (
    Scenario,
    ScenarioResult,
    builtin_scenarios,
    reduction_percent,
    run_scenario,
    validate_scenario,
)
from .sip_solver import SolverConfig, SolverInconsistencyError
from .trajectory import JointTrajectory, KnotGrid

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INCONSISTENT = 2

SUMMARY_HEADER = "scenario,energy_before_J,energy_after_J,reduction_pct,converged,outer_iters"
TRACE_HEADER = "t,q1,q2,q3,w1,w2,w3,tau1,tau2,tau3,power_total"
THREADS_ENV = "ARMOPT_THREADS"

_NUM = {"type": "number"}
_VEC2 = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}
_VEC3 = {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3}


def _obj(required: dict, optional: dict | None = None) -> dict:
    props = dict(required, **(optional or {}))
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


SCENARIO_SCHEMA = _obj(
    {
        "name": {"type": "string", "minLength": 1},
        "arm": _obj(
            {"link_lengths": _VEC3, "link_masses": _VEC3, "gravity_accel": _NUM, "torque_limits": _VEC3},
            {"joint_viscous_friction": _VEC3},
        ),
        "grid": _obj({"t0": _NUM, "tf": _NUM, "knot_spacing": _NUM}),
        "start_q": _VEC3,
        "goal": _obj({"point": _VEC2}, {"q": _VEC3}),
    },
    {
        "via": {"type": "array", "items": _obj({"time": _NUM, "point": _VEC2}, {"tolerance": _NUM})},
        "obstacles": {"type": "array", "items": _obj(
            {"center": _VEC2, "radius": _NUM},
            {"margin": _NUM, "velocity": _VEC2, "t_ref": _NUM},
        )},
    },
)


class ScenarioFormatError(ValueError):
    """Schema violations; ``problems`` holds ``(field path, message)`` pairs."""

    def __init__(self, problems: list[tuple[str, str]]):
        self.problems = problems
        super().__init__("; ".join(f"{p}: {m}" for p, m in problems))


def _path(parts) -> str:
    return ".".join(str(p) for p in parts) or "<root>"


def _schema_problems(data) -> list[tuple[str, str]]:
    out = []
    for err in Draft202012Validator(SCENARIO_SCHEMA).iter_errors(data):
        where = list(err.absolute_path)
        if err.validator == "required":
            for key in err.validator_value:
                if isinstance(err.instance, dict) and key not in err.instance:
                    out.append((_path(where + [key]), "required field is missing"))
        elif err.validator == "additionalProperties":
            allowed = set(err.schema.get("properties", {}))
            for key in sorted(set(err.instance) - allowed):
                out.append((_path(where + [key]), "unknown field"))
        else:
            out.append((_path(where), err.message))
    return sorted(set(out))


def scenario_to_dict(sc: Scenario) -> dict:
    arm = sc.arm
    return {
        "name": sc.name,
        "arm": {
            "link_lengths": list(arm.link_lengths),
            "link_masses": list(arm.link_masses),
            "gravity_accel": arm.gravity_accel,
            "torque_limits": list(arm.torque_limits),
            "joint_viscous_friction": list(arm.joint_viscous_friction),
        },
        "grid": {"t0": sc.grid.t0, "tf": sc.grid.tf, "knot_spacing": sc.grid.knot_spacing},
        "start_q": list(sc.start_q),
        "goal": {"point": list(sc.goal_point)} if sc.goal_q is None else
                {"point": list(sc.goal_point), "q": list(sc.goal_q)},
        "via": [{"time": w.time, "point": list(w.target), "tolerance": w.tolerance} for w in sc.via],
        "obstacles": [
            {"center": list(o.center), "radius": o.radius, "margin": o.margin,
             "velocity": list(o.velocity), "t_ref": o.t_ref}
            for o in sc.obstacles
        ],
    }


def serialize_scenario(sc: Scenario) -> str:
    # repr-precision floats make the round trip exact.
    return json.dumps(scenario_to_dict(sc), indent=2) + "\n"


def scenario_from_dict(data) -> Scenario:
    problems = _schema_problems(data)
    if problems:
        raise ScenarioFormatError(problems)
    try:
        arm = ArmParams(**data["arm"])
        grid = KnotGrid(**data["grid"])
        via = tuple(PrecisionWaypoint(w["time"], w["point"], w.get("tolerance", 1e-3))
                    for w in data.get("via", []))
        obstacles = tuple(ObstacleClearance(o["center"], o["radius"], **{k: o[k] for k in o
                                                                       if k not in ("center", "radius")})
                          for o in data.get("obstacles", []))
        return Scenario(name=data["name"], arm=arm, grid=grid, start_q=data["start_q"],
                        goal_point=data["goal"]["point"], goal_q=data["goal"].get("q"),
                        via=via, obstacles=obstacles)
    except ValueError as exc:
        raise ScenarioFormatError([("<root>", str(exc))]) from exc


def parse_scenario_file(path) -> Scenario:
    """Load a scenario JSON file; raises ScenarioFormatError on any schema problem."""
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioFormatError([("<root>", f"invalid JSON: {exc}")]) from exc
    return scenario_from_dict(data)


@dataclass(frozen=True)
class RunConfig:
    scenario: str = "all"
    out: Path = Path("results")
    solver: SolverConfig = field(default_factory=SolverConfig)
    power_mode: str = "abs"
    emit_trace: bool = True


class ConfigError(ValueError):
    def __init__(self, keys: list[str], message: str):
        self.keys = keys
        super().__init__(message)


def _coerce(text: str, kind: type):
    if kind is bool:
        low = text.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    return text


def build_run_config(scenario: str, out, overrides: list[str]) -> RunConfig:
    """Apply ``key=value`` overrides; unknown or ill-typed keys raise ConfigError."""
    solver_types = SolverConfig.field_types()
    top_types = {"power_mode": str, "emit_trace": bool}
    solver_kw, top_kw = {}, {}
    unknown, bad = [], []
    for item in overrides:
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep:
            bad.append((key, "expected key=value"))
            continue
        target, types = (solver_kw, solver_types) if key in solver_types else (top_kw, top_types)
        if key not in types:
            unknown.append(key)
            continue
        try:
            target[key] = _coerce(value, types[key])
        except ValueError as exc:
            bad.append((key, str(exc)))
    if unknown:
        raise ConfigError(unknown, "unknown config keys: " + ", ".join(unknown))
    if bad:
        raise ConfigError([k for k, _ in bad], "; ".join(f"{k}: {m}" for k, m in bad))
    if top_kw.get("power_mode", "abs") not in POWER_MODES:
        raise ConfigError(["power_mode"], f"power_mode must be one of {', '.join(POWER_MODES)}")
    try:
        solver = SolverConfig(**solver_kw)
    except ValueError as exc:
        raise ConfigError(sorted(solver_kw), str(exc)) from exc
    return RunConfig(scenario=scenario, out=Path(out), solver=solver, **top_kw)


def select_scenarios(selector: str) -> list[Scenario]:
    catalog = builtin_scenarios()
    if selector == "all":
        return catalog
    if selector.startswith("file:"):
        return [parse_scenario_file(selector[len("file:"):])]
    for sc in catalog:
        if sc.name == selector:
            return [sc]
    names = ", ".join([s.name for s in catalog] + ["all", "file:<path>"])
    raise ConfigError(["scenario"], f"unknown scenario {selector!r}; choose from {names}")


def _fmt(x: float) -> str:
    return f"{x:#.6g}"


def summary_row(result: ScenarioResult) -> str:
    return ",".join([result.name, _fmt(result.energy_before), _fmt(result.energy_after),
                     _fmt(result.reduction_pct), "true" if result.converged else "false",
                     str(result.report.outer_iters)])


def write_summary(path: Path, rows: list[str]) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(SUMMARY_HEADER + "\n")
        for row in rows:
            fh.write(row + "\n")


def trace_table(params: ArmParams, traj: JointTrajectory, power_mode: str = "abs",
                step: float = QUADRATURE_STEP) -> np.ndarray:
    """Rows of ``t, q, w, tau, total power`` on the quadrature grid."""
    t = traj.grid.sample_times(step)
    state = traj.eval(t)
    tau = inverse_dynamics(params, state.q, state.qdot, state.qddot)
    power = joint_power(tau, state.qdot, power_mode).sum(axis=-1)
    return np.column_stack([t, state.q, state.qdot, tau, power])


def write_trace(path: Path, table: np.ndarray) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(TRACE_HEADER + "\n")
        for row in table:
            fh.write(",".join(f"{v:.10g}" for v in row) + "\n")


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return os.cpu_count() or 1
    n = int(raw)
    if n < 1:
        raise ValueError
    return n


def _simulate(sc: Scenario, cfg: RunConfig) -> tuple[str, list[tuple[str, np.ndarray]]]:
    baseline = sc.baseline()
    before = trajectory_energy(sc.arm, baseline, power_mode=cfg.power_mode).total_energy
    # No optimization: the after columns repeat the baseline and nothing ran.
    row = ",".join([sc.name, _fmt(before), _fmt(before), _fmt(reduction_percent(before, before)),
                    "false", "0"])
    return row, [("trace_before.csv", trace_table(sc.arm, baseline, cfg.power_mode))]


def _optimize(sc: Scenario, cfg: RunConfig) -> tuple[str, list[tuple[str, np.ndarray]]]:
    res = run_scenario(sc, cfg.solver, cfg.power_mode)
    return summary_row(res), [
        ("trace_before.csv", trace_table(sc.arm, res.baseline, cfg.power_mode)),
        ("trace_after.csv", trace_table(sc.arm, res.optimized, cfg.power_mode)),
    ]


_JOBS = {"simulate": _simulate, "optimize": _optimize}


def _run_job(command: str, sc: Scenario, cfg: RunConfig):
    # Single-threaded BLAS keeps every reduction in a fixed order.
    with threadpool_limits(limits=1):
        return _JOBS[command](sc, cfg)


def run_jobs(command: str, scenarios: list[Scenario], cfg: RunConfig, workers: int) -> list:
    """Results in catalog order; scenarios run in worker processes when allowed."""
    workers = min(workers, len(scenarios))
    if workers <= 1:
        return [_run_job(command, sc, cfg) for sc in scenarios]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_job, [command] * len(scenarios), scenarios, [cfg] * len(scenarios)))


def cli_run(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="armopt", description="Energy-optimal 3R arm trajectories.")
    parser.add_argument("command", choices=("simulate", "optimize", "validate"))
    parser.add_argument("--scenario", default="all",
                        help="no-obstacles, static-obstacles, moving-obstacles, all, or file:<path>")
    parser.add_argument("--out", default="results", help="output directory")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a solver setting, power_mode or emit_trace")
    args = parser.parse_args(argv)

    try:
        workers = _threads()
    except ValueError:
        print(f"error: {THREADS_ENV} must be a positive integer", file=sys.stderr)
        return EXIT_INVALID
    try:
        cfg = build_run_config(args.scenario, args.out, args.overrides)
        scenarios = select_scenarios(cfg.scenario)
    except ConfigError as exc:
        print(f"error: {exc} [keys: {', '.join(exc.keys)}]", file=sys.stderr)
        return EXIT_INVALID
    except ScenarioFormatError as exc:
        for where, msg in exc.problems:
            print(f"error: {where}: {msg}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    invalid = False
    for sc in scenarios:
        for v in validate_scenario(sc):
            invalid = True
            print(f"{sc.name}: {v.kind}: {v.message}", file=sys.stderr)
    if invalid:
        return EXIT_INVALID
    if args.command == "validate":
        for sc in scenarios:
            print(f"{sc.name}: ok")
        return EXIT_OK

    try:
        outputs = run_jobs(args.command, scenarios, cfg, workers)
    except SolverInconsistencyError as exc:
        print(f"internal inconsistency: {exc}", file=sys.stderr)
        return EXIT_INCONSISTENT

    out = cfg.out
    out.mkdir(parents=True, exist_ok=True)
    write_summary(out / "summary.csv", [row for row, _ in outputs])
    if cfg.emit_trace:
        for sc, (_, traces) in zip(scenarios, outputs):
            (out / sc.name).mkdir(exist_ok=True)
            for fname, table in traces:
                write_trace(out / sc.name / fname, table)
    for row, _ in outputs:
        print(row)
    return EXIT_OK


def main() -> None:
    sys.exit(cli_run())
