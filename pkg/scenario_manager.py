"""
This module runs scenarios: it builds the blocks and signals of a validated
config, executes the pipeline steps in order, checks the declared
expectations and writes the declared outputs.
"""

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from analysis import (
    bode_check,
    causality_front_test,
    delay_cancellation_report,
    golden_rule_residual,
    inversion_error,
)
from block_manager import BlockManager
from circuit_blocks import CompensatorSpec, stability_probe
from config_manager import ConfigManager
from errors import ConfigError, ExpectationFailed, NgdError, StepError
from lti_core import evaluate_grid, impulse_response, negative_time_energy_ratio
from output_manager import OutputManager
from propagation import (
    apply_filter,
    detect_discontinuity,
    load_power,
    measure_peak_advance,
    rise_time_10_90,
    settling_check,
)
from report_manager import ReportManager
from signals import truncate_at_max


def _plain(value):
    """Numpy scalars to Python scalars; non-finite floats to None."""
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if math.isfinite(value) else None
    return value


@dataclass
class ExpectationOutcome:
    metric: str
    op: str
    expected: object
    actual: object
    passed: bool


@dataclass
class RunSummary:
    """Per-step reports, expectation outcomes and outputs of one scenario run."""

    name: str
    reports: dict
    expectations: list
    duration: float
    outputs: list = field(default_factory=list)

    @property
    def passed(self):
        return all(outcome.passed for outcome in self.expectations)

    def check(self):
        """Raise ExpectationFailed naming the failed expectations, if any."""
        failures = [outcome for outcome in self.expectations if not outcome.passed]
        if failures:
            raise ExpectationFailed(self.name, failures)

    def metrics(self):
        """Every numeric report field as a flat {"step.field": value} mapping."""
        flat = {}
        for step, report in self.reports.items():
            for key, value in report.items():
                if isinstance(value, (int, float)) and not isinstance(value, bool):
                    flat[f"{step}.{key}"] = value
        return flat

    def to_dict(self):
        return {
            "name": self.name,
            "passed": self.passed,
            "duration_s": self.duration,
            "reports": self.reports,
            "expectations": [asdict(outcome) for outcome in self.expectations],
            "outputs": self.outputs,
        }


class _RunState:
    def __init__(self, config):
        self.blocks = BlockManager(config)
        self.produced = {}
        self.spectra = {}
        self.path = "pipeline"

    def signal(self, name):
        if name in self.produced:
            return self.produced[name]
        return self.blocks.signal(name)


class ScenarioRunner:
    """
    Executes scenarios and reports on them.

    Attributes:
        out_dir (str): Directory the declared outputs are written below.
        tolerance_scale (float): Factor applied to every declared tolerance.
        jobs (int): Number of scenarios run concurrently by run_many and sweep.
    """

    def __init__(self, out_dir="results", tolerance_scale=1.0, jobs=1):
        if not tolerance_scale > 0:
            raise ConfigError("--tolerance-scale", "must be positive")
        if jobs < 1:
            raise ConfigError("--jobs", "must be at least 1")
        self.out_dir = out_dir
        self.tolerance_scale = tolerance_scale
        self.jobs = jobs
        self.output_manager = OutputManager()
        self.steps = {
            "filter": self._filter,
            "truncate": self._truncate,
            "peak_advance": self._peak_advance,
            "rise_time": self._rise_time,
            "settling": self._settling,
            "load_power": self._load_power,
            "discontinuity": self._discontinuity,
            "golden_rule": self._golden_rule,
            "inversion_error": self._inversion_error,
            "delay_cancellation": self._delay_cancellation,
            "bode": self._bode,
            "causality_front": self._causality_front,
            "spectrum": self._spectrum,
            "stability": self._stability,
            "impulse": self._impulse,
        }

    def run(self, config, write_outputs=True, show_status=True):
        """Run one scenario; see RunSummary."""
        started = time.perf_counter()
        state = _RunState(config)
        state.blocks.build_all()
        for line in state.blocks.describe():
            self.output_manager.debug(line)

        reports = {}
        for index, (name, step) in enumerate(zip(config.step_names, config.pipeline)):
            kind = step["step"]
            state.path = f"pipeline.{index}"
            self.output_manager.debug(f"{config.name}: step {index} {kind} ({name})")
            try:
                if show_status:
                    with self.output_manager.managed_status(f"{config.name}: {name}"):
                        report = self.steps[kind](step, state, name)
                else:
                    report = self.steps[kind](step, state, name)
            except ConfigError:
                raise
            except NgdError as e:
                raise StepError(index, kind, e) from e
            reports[name] = {key: _plain(value) for key, value in report.items()}

        outcomes = [
            self._check(expectation, reports, f"expectations.{i}")
            for i, expectation in enumerate(config.expectations)
        ]
        summary = RunSummary(
            name=config.name,
            reports=reports,
            expectations=outcomes,
            duration=time.perf_counter() - started,
        )
        if write_outputs:
            summary.outputs = self._write_outputs(config, state, summary)
        return summary

    def run_many(self, configs):
        """Run independent scenarios, in parallel threads when jobs > 1; order is kept."""
        if self.jobs == 1:
            return [self.run(config) for config in configs]
        with ThreadPoolExecutor(max_workers=self.jobs) as pool:
            return list(pool.map(lambda c: self.run(c, show_status=False), configs))

    def sweep(self, config, parameter_path, values):
        """
        Re-runs config with parameter_path set to each value.

        Returns one row {"value", "metrics", "passed"} per value and writes them
        as sweep_<name>.csv below out_dir.
        """
        values = list(values)
        if not values:
            raise ConfigError("values", "must hold at least one value")
        variants = [config.with_value(parameter_path, float(value)) for value in values]

        def run_variant(variant):
            return self.run(variant, write_outputs=False, show_status=self.jobs == 1)

        if self.jobs == 1:
            summaries = [run_variant(variant) for variant in variants]
        else:
            with ThreadPoolExecutor(max_workers=self.jobs) as pool:
                summaries = list(pool.map(run_variant, variants))
        rows = [
            {"value": float(value), "metrics": summary.metrics(), "passed": summary.passed}
            for value, summary in zip(values, summaries)
        ]
        ReportManager(self.out_dir, self.output_manager).write_sweep_csv(
            f"sweep_{config.name}.csv", parameter_path, rows
        )
        return rows

    def print_summary(self, summary):
        rows = []
        for outcome in summary.expectations:
            status = "[green]PASS[/green]" if outcome.passed else "[red]FAIL[/red]"
            rows.append(
                (outcome.metric, outcome.op, _cell(outcome.expected), _cell(outcome.actual), status)
            )
        self.output_manager.table(
            f"{summary.name} ({summary.duration:.2f} s)",
            ["metric", "op", "expected", "actual", "result"],
            rows,
        )

    def _resolve(self, metric, reports, path):
        step, key = metric.split(".", 1)
        if key not in reports.get(step, {}):
            raise ConfigError(path, f"step {step!r} reports no field {key!r}")
        return reports[step][key]

    def _check(self, expectation, reports, path):
        """Evaluates one expectation; tolerances and upper bounds widen by tolerance_scale."""
        metric = expectation["metric"]
        op = expectation["op"]
        actual = self._resolve(metric, reports, f"{path}.metric")
        expected = expectation["value"]
        if isinstance(expected, dict):
            reference = self._resolve(expected["metric"], reports, f"{path}.value.metric")
            expected = None if reference is None else expected.get("scale", 1.0) * reference

        scale = self.tolerance_scale
        if actual is None or expected is None:
            passed = False
        elif op == "eq":
            passed = actual == expected
        elif op == "approx":
            allowance = max(
                expectation.get("rel_tol", 0.0) * abs(expected), expectation.get("abs_tol", 0.0)
            )
            passed = abs(actual - expected) <= allowance * scale
        else:
            margin = max(
                expectation.get("rel_tol", 0.0) * abs(expected), expectation.get("abs_tol", 0.0)
            ) * scale
            if op == "ge":
                passed = actual >= expected - margin
            else:
                bound = expected * scale if expected > 0 else expected
                value = abs(actual) if op == "abs_le" else actual
                passed = value <= bound + margin
        return ExpectationOutcome(metric, op, _plain(expected), actual, bool(passed))

    def _write_outputs(self, config, state, summary):
        reports = ReportManager(self.out_dir, self.output_manager)
        for output in config.outputs:
            kind = output["type"]
            title = output.get("title", config.name)
            if kind in ("csv", "svg"):
                signals = {name: state.signal(name) for name in output["signals"]}
                if kind == "csv":
                    reports.write_signals_csv(output["path"], signals)
                else:
                    reports.write_trace_svg(output["path"], signals, title)
            elif kind in ("spectrum-csv", "bode-svg"):
                spectrum, reconstructed = state.spectra[output["step"]]
                if kind == "spectrum-csv":
                    reports.write_spectrum_csv(output["path"], spectrum)
                else:
                    reports.write_bode_svg(output["path"], spectrum, title, reconstructed)
            else:
                reports.write_summary(output["path"], summary.to_dict())
        return [os.path.relpath(path, self.out_dir) for path in reports.written]

    def _grid(self, step, state, key="grid"):
        return state.blocks.grid(step[key], f"{state.path}.{key}")

    def _filter(self, step, state, name):
        output = apply_filter(state.blocks.block(step["block"]), state.signal(step["input"]))
        state.produced[step["output"]] = output
        return {"wrap_energy_ratio": output.metadata["wrap_energy_ratio"]}

    def _truncate(self, step, state, name):
        truncated, cut_time = truncate_at_max(state.signal(step["input"]))
        state.produced[step["output"]] = truncated
        return {
            "cut_time": cut_time,
            "cut_index": truncated.metadata["cut_index"],
            "max_ties": truncated.metadata["max_ties"],
        }

    def _peak_advance(self, step, state, name):
        report = measure_peak_advance(state.signal(step["input"]), state.signal(step["output"]))
        return {
            "peak_in": report.peak_in,
            "peak_out": report.peak_out,
            "peak_advance": report.peak_advance,
            "correlation_advance": report.correlation_advance,
            "distortion_rms": report.distortion_rms,
        }

    def _rise_time(self, step, state, name):
        signal = state.signal(step["signal"])
        return {"rise_time": rise_time_10_90(signal, step["low"], step["high"], step["window"])}

    def _settling(self, step, state, name):
        windows = [tuple(window) for window in step["windows"]]
        signal = state.signal(step["signal"])
        return {"settled": settling_check(signal, step["low"], step["high"], windows)}

    def _load_power(self, step, state, name):
        signal = state.signal(step["signal"])
        report = load_power(signal, step["r_load"])
        if "output" in step:
            state.produced[step["output"]] = report.power
        voltage_index = int(np.argmax(np.abs(signal.samples)))
        power_index = int(np.argmax(report.power.samples))
        return {
            "peak_power_time": report.peak_power_time,
            "peak_voltage_time": signal.time_at(voltage_index),
            "peak_index_match": voltage_index == power_index,
            "peak_power": report.power.samples[power_index],
            "total_energy": report.cumulative_energy[-1],
        }

    def _discontinuity(self, step, state, name):
        return {"time": detect_discontinuity(state.signal(step["signal"]), step.get("threshold"))}

    def _golden_rule(self, step, state, name):
        report = golden_rule_residual(
            state.blocks.block(step["forward"]),
            state.blocks.block(step["feedback"]),
            self._grid(step, state),
        )
        finite = report.bound[np.isfinite(report.bound)]
        return {
            "max_residual": report.max_residual,
            "max_bound": finite.max() if finite.size else None,
            "min_loop_gain": np.abs(report.loop_gain).min(),
        }

    def _inversion_error(self, step, state, name):
        error = inversion_error(
            state.blocks.block(step["forward"]),
            state.blocks.block(step["feedback"]),
            self._grid(step, state),
        )
        return {"inversion_error": error}

    def _delay_cancellation(self, step, state, name):
        report = delay_cancellation_report(
            state.blocks.block(step["passive"]),
            state.blocks.block(step["compensator"]),
            self._grid(step, state),
        )
        return {
            "max_abs_total": report.max_abs_total,
            "max_abs_passive": np.abs(report.tau_passive).max(),
            "max_abs_compensator": np.abs(report.tau_compensator).max(),
        }

    def _bode(self, step, state, name):
        block = state.blocks.block(step["block"])
        grid = self._grid(step, state)
        report = bode_check(block, grid, tuple(step["band"]))
        state.spectra[name] = (evaluate_grid(block, grid), report.phase_reconstructed)
        return {
            "max_band_error": report.max_band_error,
            "max_abs_reconstructed": np.abs(report.phase_reconstructed).max(),
        }

    def _causality_front(self, step, state, name):
        t0, dt, count = state.blocks.sampling(step["pulse"])
        report = causality_front_test(
            state.blocks.block(step["block"]), state.blocks.pulse(step["pulse"]), t0, dt, count
        )
        return dict(asdict(report), dt=dt)

    def _spectrum(self, step, state, name):
        spectrum = evaluate_grid(state.blocks.block(step["block"]), self._grid(step, state))
        state.spectra[name] = (spectrum, None)
        return {
            "group_delay_first": spectrum.group_delay[0],
            "group_delay_min": spectrum.group_delay.min(),
            "group_delay_max": spectrum.group_delay.max(),
            "magnitude_max": spectrum.magnitude.max(),
        }

    def _stability(self, step, state, name):
        spec = CompensatorSpec(
            state.blocks.block(step["feedback"]), state.blocks.amplifier(step["amplifier"])
        )
        grid = self._grid(step, state) if "grid" in step else None
        return asdict(stability_probe(spec, grid))

    def _impulse(self, step, state, name):
        response = impulse_response(state.blocks.block(step["block"]), step["count"], step["dt"])
        return {"negative_time_energy_ratio": negative_time_energy_ratio(response)}


def _cell(value):
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def list_scenarios():
    """Built-in scenarios as (name, description) pairs, sorted by name."""
    manager = ConfigManager()
    return [(name, manager.load(name).description) for name in manager.builtin_names()]


def run_scenario(config, out_dir="results", tolerance_scale=1.0):
    """Run a ScenarioConfig, a built-in name or a scenario file path."""
    if isinstance(config, str):
        config = ConfigManager().load(config)
    return ScenarioRunner(out_dir, tolerance_scale).run(config)


def sweep(config, parameter_path, values, out_dir="results", jobs=1):
    if isinstance(config, str):
        config = ConfigManager().load(config)
    return ScenarioRunner(out_dir, jobs=jobs).sweep(config, parameter_path, values)
