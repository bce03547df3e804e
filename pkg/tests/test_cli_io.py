"""Scenario files, run configuration, and CLI exit codes and outputs."""
import json
import re

import pytest

from armopt.cli_io import (
    EXIT_INVALID,
    EXIT_OK,
    SUMMARY_HEADER,
    TRACE_HEADER,
    ConfigError,
    ScenarioFormatError,
    build_run_config,
    cli_run,
    parse_scenario_file,
    scenario_from_dict,
    scenario_to_dict,
    serialize_scenario,
)
from armopt.scenarios import builtin_scenarios, get_scenario

ROW = re.compile(r"^[a-z-]+,(?:[-0-9.e+]+,){3}(true|false),\d+$")


def _sig_digits(field: str) -> int:
    mantissa = field.split("e")[0].lstrip("-").replace(".", "").lstrip("0")
    return len(mantissa)


@pytest.mark.parametrize("sc", builtin_scenarios(), ids=lambda s: s.name)
def test_round_trip(tmp_path, sc):
    path = tmp_path / "sc.json"
    path.write_text(serialize_scenario(sc))
    assert parse_scenario_file(path) == sc


def test_missing_field_named():
    data = scenario_to_dict(get_scenario("no-obstacles"))
    del data["arm"]["link_lengths"]
    with pytest.raises(ScenarioFormatError) as exc:
        scenario_from_dict(data)
    assert ("arm.link_lengths", "required field is missing") in exc.value.problems


def test_unknown_field_rejected():
    data = scenario_to_dict(get_scenario("no-obstacles"))
    data["obstacles"] = [{"center": [1.0, 1.0], "radius": 0.1, "raduis": 0.2}]
    with pytest.raises(ScenarioFormatError) as exc:
        scenario_from_dict(data)
    assert ("obstacles.0.raduis", "unknown field") in exc.value.problems


def test_wrong_type_rejected():
    data = scenario_to_dict(get_scenario("no-obstacles"))
    data["grid"]["tf"] = "thirty"
    with pytest.raises(ScenarioFormatError) as exc:
        scenario_from_dict(data)
    assert exc.value.problems[0][0] == "grid.tf"


def test_overrides_type_checked(tmp_path):
    cfg = build_run_config("all", tmp_path, ["outer_max_iters=7", "power_mode=clamp", "emit_trace=false"])
    assert cfg.solver.outer_max_iters == 7 and cfg.power_mode == "clamp" and not cfg.emit_trace
    with pytest.raises(ConfigError) as exc:
        build_run_config("all", tmp_path, ["outer_max_iter=7", "bogus=1"])
    assert exc.value.keys == ["outer_max_iter", "bogus"]
    with pytest.raises(ConfigError):
        build_run_config("all", tmp_path, ["outer_max_iters=seven"])
    with pytest.raises(ConfigError):
        build_run_config("all", tmp_path, ["power_mode=net"])


def test_validate_builtin(capsys):
    assert cli_run(["validate", "--scenario", "all"]) == EXIT_OK
    assert capsys.readouterr().out.splitlines() == [f"{s.name}: ok" for s in builtin_scenarios()]


def test_validate_unreachable_file(tmp_path, capsys):
    data = scenario_to_dict(get_scenario("no-obstacles"))
    data["goal"] = {"point": [10.0, 0.0]}
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(data))
    assert cli_run(["validate", "--scenario", f"file:{bad}"]) == EXIT_INVALID
    assert ": reach: " in capsys.readouterr().err


def test_malformed_file_exit_code(tmp_path, capsys):
    data = scenario_to_dict(get_scenario("no-obstacles"))
    del data["arm"]["link_lengths"]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(data))
    assert cli_run(["validate", "--scenario", f"file:{bad}"]) == EXIT_INVALID
    assert "arm.link_lengths" in capsys.readouterr().err


def test_bad_config_key_exit_code(tmp_path, capsys):
    assert cli_run(["simulate", "--out", str(tmp_path), "--set", "nope=1"]) == EXIT_INVALID
    assert "nope" in capsys.readouterr().err
    assert cli_run(["simulate", "--scenario", "sideways", "--out", str(tmp_path)]) == EXIT_INVALID


def test_bad_thread_count(tmp_path, monkeypatch):
    monkeypatch.setenv("ARMOPT_THREADS", "zero")
    assert cli_run(["validate"]) == EXIT_INVALID


def test_simulate_outputs(tmp_path):
    assert cli_run(["simulate", "--scenario", "all", "--out", str(tmp_path)]) == EXIT_OK
    raw = (tmp_path / "summary.csv").read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().splitlines()
    assert lines[0] == SUMMARY_HEADER
    assert [ln.split(",")[0] for ln in lines[1:]] == [s.name for s in builtin_scenarios()]
    for ln in lines[1:]:
        assert ROW.match(ln)
        fields = ln.split(",")
        assert fields[1] == fields[2] and fields[4] == "false" and fields[5] == "0"
        assert _sig_digits(fields[1]) == 6
    trace = (tmp_path / "no-obstacles" / "trace_before.csv").read_text().splitlines()
    assert trace[0] == TRACE_HEADER
    assert len(trace) == 3002
    first = [float(v) for v in trace[1].split(",")]
    assert first[0] == 0.0 and first[4:7] == [0.0, 0.0, 0.0]
    assert not (tmp_path / "no-obstacles" / "trace_after.csv").exists()


def test_emit_trace_off(tmp_path):
    assert cli_run(["simulate", "--scenario", "no-obstacles", "--out", str(tmp_path),
                    "--set", "emit_trace=false"]) == EXIT_OK
    assert (tmp_path / "summary.csv").exists()
    assert not (tmp_path / "no-obstacles").exists()
