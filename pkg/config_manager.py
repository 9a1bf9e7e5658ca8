"""
This module loads and validates the scenario documents of the ngdSim application.
"""

import copy
import json
import os
from dataclasses import dataclass, field
from numbers import Real

from errors import ConfigError

SCHEMA_VERSION = 1

# Field roles: "number", "integer", "text", "block", "blocks", "amplifier",
# "signal" (defined or produced earlier), "produces", "pulse", "grid",
# "window", "windows". A trailing "?" marks the field optional.
BLOCK_SCHEMA = {
    "identity": {},
    "delay": {"tau": "number"},
    "gain": {"value": "number"},
    "rc_lowpass": {"R": "number", "C": "number"},
    "rc_inverse": {"R": "number", "C": "number"},
    "rlc_bandpass": {"R": "number", "C": "number", "L": "number?", "omega0": "number?"},
    "rlc_notch": {
        "R": "number",
        "C": "number",
        "R_f": "number",
        "L": "number?",
        "omega0": "number?",
    },
    "opamp": {"dc_gain": "number", "pole_frequency": "number"},
    "series": {"members": "blocks"},
    "feedback": {"forward": "block", "feedback": "block"},
    "ngd_compensator": {"feedback": "block", "amplifier": "amplifier", "probe_grid": "grid?"},
    "compensated_link": {"passive": "block", "amplifier": "amplifier", "probe_grid": "grid?"},
}

_SAMPLING_OVERRIDES = {"t0": "number?", "dt": "number?", "count": "integer?"}
SIGNAL_SCHEMA = {
    "gaussian": {"center": "number", "fwhm": "number", "amplitude": "number?"},
    "square": {"period": "number", "duty": "number?", "low": "number?", "high": "number?"},
    "step": {"t_edge": "number", "low": "number?", "high": "number?"},
}

STEP_SCHEMA = {
    "filter": {"block": "block", "input": "signal", "output": "produces"},
    "truncate": {"input": "signal", "output": "produces"},
    "peak_advance": {"input": "signal", "output": "signal"},
    "rise_time": {"signal": "signal", "low": "number", "high": "number", "window": "window"},
    "settling": {"signal": "signal", "low": "number", "high": "number", "windows": "windows"},
    "load_power": {"signal": "signal", "r_load": "number", "output": "produces?"},
    "discontinuity": {"signal": "signal", "threshold": "number?"},
    "golden_rule": {"forward": "block", "feedback": "block", "grid": "grid"},
    "inversion_error": {"forward": "block", "feedback": "block", "grid": "grid"},
    "delay_cancellation": {"passive": "block", "compensator": "block", "grid": "grid"},
    "bode": {"block": "block", "grid": "grid", "band": "window"},
    "causality_front": {"block": "block", "pulse": "pulse"},
    "spectrum": {"block": "block", "grid": "grid"},
    "stability": {"feedback": "block", "amplifier": "amplifier", "grid": "grid?"},
    "impulse": {"block": "block", "dt": "number", "count": "integer"},
}

EXPECTATION_OPS = ("approx", "le", "ge", "eq", "abs_le")
OUTPUT_TYPES = ("csv", "svg", "spectrum-csv", "bode-svg", "summary-json")
TOP_LEVEL_KEYS = {
    "schema_version",
    "name",
    "description",
    "sampling",
    "blocks",
    "signals",
    "pipeline",
    "expectations",
    "outputs",
}


@dataclass(frozen=True)
class ScenarioConfig:
    """A validated scenario document."""

    name: str
    description: str
    sampling: dict
    blocks: dict
    signals: dict
    pipeline: list
    expectations: list
    outputs: list
    source: str = "<memory>"
    step_names: tuple = field(default_factory=tuple)

    def document(self):
        """A deep copy of the document this config was validated from."""
        document = {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "description": self.description,
            "blocks": self.blocks,
            "signals": self.signals,
            "pipeline": self.pipeline,
            "expectations": self.expectations,
            "outputs": self.outputs,
        }
        if self.sampling:
            document["sampling"] = self.sampling
        return copy.deepcopy(document)

    def with_value(self, parameter_path, value):
        """A copy with the numeric field at the dotted parameter_path replaced."""
        document = self.document()
        parts = parameter_path.split(".")
        node = document
        for depth, part in enumerate(parts[:-1]):
            node = _descend(node, part, ".".join(parts[: depth + 1]))
        leaf = parts[-1]
        current = _descend(node, leaf, parameter_path)
        if isinstance(current, bool) or not isinstance(current, Real):
            raise ConfigError(parameter_path, "does not resolve to a numeric field")
        if isinstance(current, int) and float(value).is_integer():
            value = int(value)
        if isinstance(node, list):
            node[int(leaf)] = value
        else:
            node[leaf] = value
        return ConfigManager().validate(document, self.source)


def _descend(node, part, path):
    if isinstance(node, dict) and part in node:
        return node[part]
    if isinstance(node, list) and part.isdigit() and int(part) < len(node):
        return node[int(part)]
    raise ConfigError(path, "does not exist in the scenario")


def _is_number(value):
    return isinstance(value, Real) and not isinstance(value, bool)


class ConfigManager:
    """
    Resolves scenario names and paths, and validates scenario documents.

    Attributes:
        SCENARIO_DIR (str): Directory of the built-in scenarios, next to this module.
    """

    SCENARIO_DIR = "scenarios"

    def get_directory(self):
        """Return the directory holding the built-in scenarios."""
        return os.path.join(os.path.dirname(os.path.abspath(__file__)), self.SCENARIO_DIR)

    def builtin_names(self):
        """Names of the built-in scenarios, sorted."""
        directory = self.get_directory()
        if not os.path.isdir(directory):
            return []
        return sorted(f[:-5] for f in os.listdir(directory) if f.endswith(".json"))

    def resolve(self, name_or_path):
        """Return the file path of a built-in scenario name or of an existing file."""
        if os.path.isfile(name_or_path):
            return name_or_path
        builtin = os.path.join(self.get_directory(), f"{name_or_path}.json")
        if os.path.isfile(builtin):
            return builtin
        raise ConfigError("", f"No scenario file or built-in named {name_or_path!r}")

    def load_config(self, file_path):
        """Load a JSON document, reporting I/O and syntax problems as ConfigError."""
        try:
            with open(file_path, "r", encoding="utf-8") as f:
                return json.load(f)
        except OSError as e:
            raise ConfigError("", f"Cannot read {file_path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError("", f"{file_path} is not valid JSON: {e}") from e

    def load(self, name_or_path):
        path = self.resolve(name_or_path)
        return self.validate(self.load_config(path), path)

    def validate(self, document, source="<memory>"):
        """
        Checks the document shape and every cross reference.

        Raises ConfigError naming the dotted path of the first offending field.
        Numeric ranges of block and signal parameters are checked later, when
        the blocks are built.
        """
        if not isinstance(document, dict):
            raise ConfigError("", "The scenario document must be an object")
        unknown = sorted(set(document) - TOP_LEVEL_KEYS)
        if unknown:
            raise ConfigError(unknown[0], "is not a recognised key")
        version = document.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ConfigError("schema_version", f"must be {SCHEMA_VERSION}, got {version!r}")
        name = document.get("name")
        if not isinstance(name, str) or not name:
            raise ConfigError("name", "must be a non-empty string")
        description = document.get("description", "")
        if not isinstance(description, str):
            raise ConfigError("description", "must be a string")

        sampling = document.get("sampling", {})
        if "sampling" in document:
            self._check_fields(
                sampling, {"t0": "number", "dt": "number", "count": "integer"}, "sampling", {}
            )

        blocks = document.get("blocks", {})
        if not isinstance(blocks, dict):
            raise ConfigError("blocks", "must be an object")
        for block_name, definition in blocks.items():
            path = f"blocks.{block_name}"
            kind = self._kind(definition, BLOCK_SCHEMA, path)
            self._check_fields(definition, BLOCK_SCHEMA[kind], path, {"blocks": blocks})
        self._check_acyclic(blocks)

        signals = document.get("signals", {})
        if not isinstance(signals, dict):
            raise ConfigError("signals", "must be an object")
        for signal_name, definition in signals.items():
            path = f"signals.{signal_name}"
            kind = self._kind(definition, SIGNAL_SCHEMA, path)
            schema = dict(SIGNAL_SCHEMA[kind], **_SAMPLING_OVERRIDES)
            self._check_fields(definition, schema, path, {})

        pipeline = document.get("pipeline", [])
        if not isinstance(pipeline, list) or not pipeline:
            raise ConfigError("pipeline", "must be a non-empty list")
        known_signals = set(signals)
        step_names = []
        for index, step in enumerate(pipeline):
            path = f"pipeline.{index}"
            kind = self._kind(step, STEP_SCHEMA, path, key="step")
            context = {"blocks": blocks, "signals": known_signals, "defined": signals}
            self._check_fields(step, dict(STEP_SCHEMA[kind], name="text?"), path, context)
            step_name = step.get("name") or (kind if kind not in step_names else f"{kind}_{index}")
            if step_name in step_names:
                raise ConfigError(f"{path}.name", f"duplicates step name {step_name!r}")
            step_names.append(step_name)
            for key, role in STEP_SCHEMA[kind].items():
                if role.rstrip("?") == "produces" and key in step:
                    known_signals.add(step[key])

        expectations = document.get("expectations", [])
        if not isinstance(expectations, list):
            raise ConfigError("expectations", "must be a list")
        for index, expectation in enumerate(expectations):
            self._check_expectation(expectation, f"expectations.{index}", step_names)

        outputs = document.get("outputs", [])
        if not isinstance(outputs, list):
            raise ConfigError("outputs", "must be a list")
        for index, output in enumerate(outputs):
            self._check_output(output, f"outputs.{index}", known_signals, step_names, pipeline)

        return ScenarioConfig(
            name=name,
            description=description,
            sampling=dict(sampling),
            blocks=copy.deepcopy(blocks),
            signals=copy.deepcopy(signals),
            pipeline=copy.deepcopy(pipeline),
            expectations=copy.deepcopy(expectations),
            outputs=copy.deepcopy(outputs),
            source=source,
            step_names=tuple(step_names),
        )

    def _kind(self, definition, schema, path, key="kind"):
        if not isinstance(definition, dict):
            raise ConfigError(path, "must be an object")
        kind = definition.get(key)
        if kind not in schema:
            raise ConfigError(f"{path}.{key}", f"unknown {key} {kind!r}")
        return kind

    def _check_fields(self, definition, schema, path, context):
        if not isinstance(definition, dict):
            raise ConfigError(path, "must be an object")
        for key in definition:
            if key not in schema and key not in ("kind", "step"):
                raise ConfigError(f"{path}.{key}", "is not a recognised field")
        for key, role in schema.items():
            optional = role.endswith("?")
            role = role.rstrip("?")
            if key not in definition:
                if not optional:
                    raise ConfigError(f"{path}.{key}", "is required")
                continue
            self._check_value(definition[key], role, f"{path}.{key}", context)

    def _check_value(self, value, role, path, context):
        if role == "number" and not _is_number(value):
            raise ConfigError(path, "must be a number")
        if role == "integer" and (isinstance(value, bool) or not isinstance(value, int)):
            raise ConfigError(path, "must be an integer")
        if role in ("text", "produces") and not isinstance(value, str):
            raise ConfigError(path, "must be a string")
        if role == "block" and value not in context["blocks"]:
            raise ConfigError(path, f"references undefined block {value!r}")
        if role == "blocks":
            if not isinstance(value, list) or not value:
                raise ConfigError(path, "must be a non-empty list of block names")
            for index, member in enumerate(value):
                self._check_value(member, "block", f"{path}.{index}", context)
        if role == "amplifier":
            self._check_value(value, "block", path, context)
            if context["blocks"][value].get("kind") != "opamp":
                raise ConfigError(path, f"block {value!r} is not an opamp")
        if role == "signal" and value not in context["signals"]:
            raise ConfigError(path, f"references undefined signal {value!r}")
        if role == "pulse":
            if context["defined"].get(value, {}).get("kind") != "gaussian":
                raise ConfigError(path, f"{value!r} is not a gaussian signal definition")
        if role == "grid":
            self._check_fields(
                value,
                {
                    "omega_min": "number",
                    "omega_max": "number",
                    "count": "integer",
                    "spacing": "text?",
                },
                path,
                context,
            )
        if role == "window":
            if not (isinstance(value, list) and len(value) == 2 and all(map(_is_number, value))):
                raise ConfigError(path, "must be a [start, end] pair of numbers")
        if role == "windows":
            if not isinstance(value, list) or not value:
                raise ConfigError(path, "must be a non-empty list of [start, end, state]")
            for index, window in enumerate(value):
                if not (
                    isinstance(window, list)
                    and len(window) == 3
                    and _is_number(window[0])
                    and _is_number(window[1])
                    and window[2] in ("HI", "LO")
                ):
                    raise ConfigError(f"{path}.{index}", "must be [start, end, 'HI' | 'LO']")

    def _check_acyclic(self, blocks):
        # Depth-first search over block references.
        state = {}

        def references(definition):
            schema = BLOCK_SCHEMA[definition["kind"]]
            for key, role in schema.items():
                role = role.rstrip("?")
                if role in ("block", "amplifier") and key in definition:
                    yield definition[key]
                elif role == "blocks":
                    yield from definition.get(key, [])

        def visit(name, trail):
            if state.get(name) == "done":
                return
            if state.get(name) == "open":
                raise ConfigError(f"blocks.{name}", f"reference cycle {' -> '.join(trail)}")
            state[name] = "open"
            for child in references(blocks[name]):
                visit(child, trail + [child])
            state[name] = "done"

        for name in blocks:
            visit(name, [name])

    def _check_expectation(self, expectation, path, step_names):
        if not isinstance(expectation, dict):
            raise ConfigError(path, "must be an object")
        allowed = {"metric", "op", "value", "rel_tol", "abs_tol"}
        for key in expectation:
            if key not in allowed:
                raise ConfigError(f"{path}.{key}", "is not a recognised field")
        self._check_metric(expectation.get("metric"), f"{path}.metric", step_names)
        if expectation.get("op") not in EXPECTATION_OPS:
            raise ConfigError(f"{path}.op", f"must be one of {', '.join(EXPECTATION_OPS)}")
        value = expectation.get("value")
        if isinstance(value, dict):
            self._check_metric(value.get("metric"), f"{path}.value.metric", step_names)
            if not _is_number(value.get("scale", 1.0)):
                raise ConfigError(f"{path}.value.scale", "must be a number")
        elif not (_is_number(value) or isinstance(value, bool)):
            raise ConfigError(f"{path}.value", "must be a number, a boolean or a metric reference")
        for key in ("rel_tol", "abs_tol"):
            if key in expectation and not (_is_number(expectation[key]) and expectation[key] >= 0):
                raise ConfigError(f"{path}.{key}", "must be a non-negative number")
        tolerances = {"rel_tol", "abs_tol"} & set(expectation)
        if expectation["op"] == "approx" and not tolerances:
            raise ConfigError(path, "approx needs rel_tol or abs_tol")

    def _check_metric(self, metric, path, step_names):
        if not isinstance(metric, str) or "." not in metric:
            raise ConfigError(path, "must read '<step name>.<field>'")
        step = metric.split(".", 1)[0]
        if step not in step_names:
            raise ConfigError(path, f"references unknown step {step!r}")

    def _check_output(self, output, path, known_signals, step_names, pipeline):
        if not isinstance(output, dict):
            raise ConfigError(path, "must be an object")
        kind = output.get("type")
        if kind not in OUTPUT_TYPES:
            raise ConfigError(f"{path}.type", f"must be one of {', '.join(OUTPUT_TYPES)}")
        if not isinstance(output.get("path"), str) or not output["path"]:
            raise ConfigError(f"{path}.path", "must be a relative file name")
        if kind in ("csv", "svg"):
            names = output.get("signals")
            if not isinstance(names, list) or not names:
                raise ConfigError(f"{path}.signals", "must be a non-empty list of signal names")
            for index, name in enumerate(names):
                if name not in known_signals:
                    raise ConfigError(
                        f"{path}.signals.{index}", f"references undefined signal {name!r}"
                    )
        if kind in ("spectrum-csv", "bode-svg"):
            source = output.get("step")
            kinds = {
                step_name: step["step"] for step_name, step in zip(step_names, pipeline)
            }
            if kinds.get(source) not in ("spectrum", "bode"):
                raise ConfigError(f"{path}.step", "must name a spectrum or bode step")
