"""Tests for scenario validation, the runner and the command line."""

import json

import pytest

from config_manager import ConfigManager
from errors import ConfigError, StepError, WraparoundContamination
from main import EXIT_ERROR, EXIT_EXPECTATION_FAILED, EXIT_OK, main
from scenario_manager import ScenarioRunner, list_scenarios, run_scenario, sweep

BUILTINS = [
    "bode_check",
    "energy_report",
    "fig2_rlc_advance",
    "fig3_causality",
    "fig5_rc_cancellation",
    "golden_rule_sweep",
    "identity_smoke",
]


def _smoke_document(**changes):
    document = ConfigManager().load("identity_smoke").document()
    document.update(changes)
    return document


def test_list_scenarios():
    scenarios = list_scenarios()
    names = [name for name, _ in scenarios]
    assert names == sorted(names)
    assert set(BUILTINS) <= set(names)
    assert all(description for _, description in scenarios)


@pytest.mark.parametrize("name", BUILTINS)
def test_builtin_scenario_passes(name, tmp_path):
    summary = run_scenario(name, out_dir=str(tmp_path))
    failed = [outcome for outcome in summary.expectations if not outcome.passed]
    assert not failed
    summary.check()
    for relative in summary.outputs:
        assert (tmp_path / relative).is_file()


def test_identity_smoke_outputs_are_deterministic(tmp_path):
    first = run_scenario("identity_smoke", out_dir=str(tmp_path / "a"))
    run_scenario("identity_smoke", out_dir=str(tmp_path / "b"))
    relative = first.outputs[0]
    content = (tmp_path / "a" / relative).read_bytes()
    assert content == (tmp_path / "b" / relative).read_bytes()
    assert content.decode().splitlines()[0] == "time_s,input,output"
    assert len(content.decode().splitlines()) == 1025


def test_advance_scenario_metrics(tmp_path):
    summary = run_scenario("fig2_rlc_advance", out_dir=str(tmp_path))
    advance = summary.reports["peak_advance"]
    assert advance["peak_advance"] == pytest.approx(0.0121, rel=0.05)
    assert advance["distortion_rms"] < 0.05
    assert summary.reports["stability"]["stable"] is True
    assert summary.metrics()["peak_advance.peak_advance"] == advance["peak_advance"]


def test_summary_json(tmp_path):
    summary = run_scenario("golden_rule_sweep", out_dir=str(tmp_path))
    written = json.loads((tmp_path / "golden_rule_sweep" / "summary.json").read_text())
    assert written["name"] == "golden_rule_sweep"
    assert written["passed"] is True
    assert written["reports"]["golden_rule"]["max_residual"] == pytest.approx(
        summary.reports["golden_rule"]["max_residual"]
    )


def test_tolerance_scale_widens_bounds():
    document = _smoke_document(
        expectations=[{"metric": "peak_advance.distortion_rms", "op": "le", "value": -1.0}]
    )
    config = ConfigManager().validate(document)
    assert not ScenarioRunner(tolerance_scale=10.0).run(config, write_outputs=False).passed
    document["expectations"] = [
        {"metric": "peak_advance.peak_advance", "op": "approx", "value": 1e-3, "abs_tol": 1e-4}
    ]
    config = ConfigManager().validate(document)
    assert not ScenarioRunner().run(config, write_outputs=False).passed
    assert ScenarioRunner(tolerance_scale=20.0).run(config, write_outputs=False).passed


def test_sweep_scales_as_inverse_gain(tmp_path):
    rows = sweep("golden_rule_sweep", "blocks.amp.dc_gain", [1e2, 1e3, 1e4], str(tmp_path))
    for row in rows:
        assert row["metrics"]["golden_rule.max_residual"] == pytest.approx(
            1 / row["value"], rel=0.1
        )
    table = (tmp_path / "sweep_golden_rule_sweep.csv").read_text().splitlines()
    assert table[0].startswith("blocks.amp.dc_gain,")
    assert len(table) == 4


def test_single_value_sweep_matches_run(tmp_path):
    config = ConfigManager().load("golden_rule_sweep")
    runner = ScenarioRunner(str(tmp_path))
    [row] = runner.sweep(config, "blocks.amp.dc_gain", [1000.0])
    assert row["metrics"] == runner.run(config, write_outputs=False).metrics()


def test_sweep_rejects_empty_values(tmp_path):
    with pytest.raises(ConfigError) as excinfo:
        sweep("golden_rule_sweep", "blocks.amp.dc_gain", [], str(tmp_path))
    assert excinfo.value.path == "values"
    with pytest.raises(ConfigError):
        sweep("golden_rule_sweep", "blocks.amp.nonexistent", [1.0], str(tmp_path))


def test_undefined_block_is_reported_with_path():
    document = _smoke_document()
    document["pipeline"][0]["block"] = "missing"
    with pytest.raises(ConfigError) as excinfo:
        ConfigManager().validate(document)
    assert excinfo.value.path == "pipeline.0.block"


def test_schema_version_is_checked():
    with pytest.raises(ConfigError) as excinfo:
        ConfigManager().validate(_smoke_document(schema_version=2))
    assert excinfo.value.path == "schema_version"


def test_invalid_component_value_names_the_field():
    document = _smoke_document(blocks={"wire": {"kind": "rc_lowpass", "R": -1.0, "C": 1e-6}})
    config = ConfigManager().validate(document)
    with pytest.raises(ConfigError) as excinfo:
        ScenarioRunner().run(config, write_outputs=False)
    assert excinfo.value.path == "blocks.wire.R"


def test_reference_cycle_is_rejected():
    document = _smoke_document(
        blocks={
            "wire": {"kind": "series", "members": ["loop"]},
            "loop": {"kind": "feedback", "forward": "wire", "feedback": "wire"},
        }
    )
    with pytest.raises(ConfigError) as excinfo:
        ConfigManager().validate(document)
    assert excinfo.value.path.startswith("blocks.")
    assert "cycle" in str(excinfo.value)


def test_simulation_error_names_the_step():
    document = _smoke_document(blocks={"wire": {"kind": "delay", "tau": -0.6}})
    config = ConfigManager().validate(document)
    with pytest.raises(StepError) as excinfo:
        ScenarioRunner().run(config, write_outputs=False)
    assert excinfo.value.index == 0
    assert excinfo.value.kind == "filter"
    assert isinstance(excinfo.value.error, WraparoundContamination)


def test_run_many_keeps_order(tmp_path):
    manager = ConfigManager()
    configs = [manager.load("golden_rule_sweep"), manager.load("identity_smoke")]
    summaries = ScenarioRunner(str(tmp_path), jobs=2).run_many(configs)
    assert [s.name for s in summaries] == ["golden_rule_sweep", "identity_smoke"]
    assert all(s.passed for s in summaries)


def test_main_exit_codes(tmp_path):
    out_dir = str(tmp_path / "out")
    assert main(["--out-dir", out_dir, "list"]) == EXIT_OK
    assert main(["--out-dir", out_dir, "run", "identity_smoke"]) == EXIT_OK

    failing = tmp_path / "failing.json"
    document = _smoke_document(
        expectations=[
            {"metric": "peak_advance.peak_advance", "op": "approx", "value": 1.0, "abs_tol": 1e-9}
        ]
    )
    failing.write_text(json.dumps(document))
    assert main(["--out-dir", out_dir, "run", str(failing)]) == EXIT_EXPECTATION_FAILED

    broken = tmp_path / "broken.json"
    broken.write_text(json.dumps(_smoke_document(schema_version=2)))
    assert main(["--out-dir", out_dir, "run", str(broken)]) == EXIT_ERROR
    assert main(["--out-dir", out_dir, "run", "no_such_scenario"]) == EXIT_ERROR


def test_sweep_command_line(tmp_path):
    out_dir = tmp_path / "out"
    assert "sampling" not in ConfigManager().load("golden_rule_sweep").document()
    command = ["--out-dir", str(out_dir), "sweep", "golden_rule_sweep"]
    command += ["--param", "blocks.amp.dc_gain"]
    assert main(command + ["--values", "1000"]) == EXIT_OK
    # expectations are pinned to the scenario's own gain of 1000
    assert main(command + ["--values", "100,1000,10000"]) == EXIT_EXPECTATION_FAILED
    table = (out_dir / "sweep_golden_rule_sweep.csv").read_text().splitlines()
    assert len(table) == 4


def test_power_peak_moves_with_voltage_peak(tmp_path):
    summary = run_scenario("energy_report", out_dir=str(tmp_path))
    reports = summary.reports
    dt = 0.0005
    assert reports["input_power"]["peak_power_time"] == pytest.approx(
        reports["peak_advance"]["peak_in"], abs=dt
    )
    assert reports["output_power"]["peak_power_time"] == pytest.approx(
        reports["peak_advance"]["peak_out"], abs=dt
    )
    shift = reports["input_power"]["peak_power_time"] - reports["output_power"]["peak_power_time"]
    assert shift == pytest.approx(reports["peak_advance"]["peak_advance"], abs=dt)
