"""
This module turns the block and signal definitions of a scenario into objects.
"""

from circuit_blocks import (
    CompensatorSpec,
    OpAmpModel,
    make_compensated_link,
    make_ngd_compensator,
    opamp_block,
    rc_inverse_block,
    rc_lowpass_block,
    rlc_bandpass_block,
    rlc_notch_block,
)
from errors import ConfigError, InvalidParameter
from lti_core import FrequencyGrid, Identity, PureDelay, Series, compose_feedback, gain_block
from output_manager import OutputManager
from signals import GaussianPulseSpec, SquareWaveSpec, gaussian_pulse, square_wave, step_signal


def _inductance(definition, path):
    if "L" in definition:
        return definition["L"]
    if "omega0" in definition:
        omega0 = definition["omega0"]
        if not omega0 > 0:
            raise ConfigError(f"{path}.omega0", "must be positive")
        return 1.0 / (omega0**2 * definition["C"])
    raise ConfigError(f"{path}.L", "is required (or give omega0)")


class BlockManager:
    """
    Builds and caches the blocks and signals named in a ScenarioConfig.

    Parameter validation errors are reported as ConfigError with the dotted
    path of the parameter.
    """

    def __init__(self, config):
        self.config = config
        self.output_manager = OutputManager()
        self._blocks = {}
        self._signals = {}
        self.builders = {
            "identity": lambda d, p: Identity(),
            "delay": lambda d, p: PureDelay(d["tau"]),
            "gain": lambda d, p: gain_block(d["value"]),
            "rc_lowpass": lambda d, p: rc_lowpass_block(d["R"], d["C"]),
            "rc_inverse": lambda d, p: rc_inverse_block(d["R"], d["C"]),
            "rlc_bandpass": lambda d, p: rlc_bandpass_block(d["R"], _inductance(d, p), d["C"]),
            "rlc_notch": lambda d, p: rlc_notch_block(
                d["R"], _inductance(d, p), d["C"], d["R_f"]
            ),
            "opamp": lambda d, p: opamp_block(self._model(d, p)),
            "series": lambda d, p: Series(tuple(self.block(m) for m in d["members"])),
            "feedback": lambda d, p: compose_feedback(
                self.block(d["forward"]), self.block(d["feedback"])
            ),
            "ngd_compensator": self._build_compensator,
            "compensated_link": self._build_link,
        }

    def block(self, name):
        """Return the block called name, building it and its references on first use."""
        if name not in self._blocks:
            path = f"blocks.{name}"
            definition = self.config.blocks[name]
            try:
                self._blocks[name] = self.builders[definition["kind"]](definition, path)
            except InvalidParameter as e:
                raise ConfigError(f"{path}.{e.name}", str(e)) from e
            self.output_manager.debug(f"Built block {name}: {self._blocks[name]!r}", 2)
        return self._blocks[name]

    def build_all(self):
        """Build every block and signal once, surfacing configuration errors early."""
        for name in self.config.blocks:
            self.block(name)
        for name in self.config.signals:
            self.signal(name)

    def amplifier(self, name):
        return self._model(self.config.blocks[name], f"blocks.{name}")

    def _model(self, definition, path):
        try:
            return OpAmpModel(definition["dc_gain"], definition["pole_frequency"])
        except InvalidParameter as e:
            raise ConfigError(f"{path}.{e.name}", str(e)) from e

    def _spec(self, element, definition):
        return CompensatorSpec(self.block(element), self.amplifier(definition["amplifier"]))

    def _build_compensator(self, definition, path):
        spec = self._spec(definition["feedback"], definition)
        return make_ngd_compensator(spec, self._probe_grid(definition, path))

    def _build_link(self, definition, path):
        spec = self._spec(definition["passive"], definition)
        compensator = make_ngd_compensator(spec, self._probe_grid(definition, path))
        return make_compensated_link(spec.feedback_element, compensator)

    def _probe_grid(self, definition, path):
        if "probe_grid" not in definition:
            return None
        return self.grid(definition["probe_grid"], f"{path}.probe_grid")

    def grid(self, definition, path):
        """FrequencyGrid from a {omega_min, omega_max, count, spacing} definition."""
        try:
            return FrequencyGrid(
                float(definition["omega_min"]),
                float(definition["omega_max"]),
                int(definition["count"]),
                definition.get("spacing", "linear"),
            )
        except InvalidParameter as e:
            raise ConfigError(path, str(e)) from e

    def sampling(self, name):
        """(t0, dt, count) of a signal definition, falling back on the scenario sampling."""
        definition = self.config.signals[name]
        values = {}
        for key in ("t0", "dt", "count"):
            if key in definition:
                values[key] = definition[key]
            elif key in self.config.sampling:
                values[key] = self.config.sampling[key]
            else:
                raise ConfigError(f"sampling.{key}", f"is required by signal {name!r}")
        return values["t0"], values["dt"], values["count"]

    def pulse(self, name):
        definition = self.config.signals[name]
        try:
            return GaussianPulseSpec(
                definition["center"], definition["fwhm"], definition.get("amplitude", 1.0)
            )
        except InvalidParameter as e:
            raise ConfigError(f"signals.{name}.{e.name}", str(e)) from e

    def signal(self, name):
        """Return the generated signal called name."""
        if name not in self._signals:
            definition = self.config.signals[name]
            t0, dt, count = self.sampling(name)
            kind = definition["kind"]
            try:
                if kind == "gaussian":
                    generated = gaussian_pulse(self.pulse(name), t0, dt, count)
                    if not generated.metadata["window_covers_pulse"]:
                        self.output_manager.warning(
                            f"Window of signal {name!r} does not cover the pulse center +/- 5 FWHM"
                        )
                elif kind == "square":
                    spec = SquareWaveSpec(
                        definition["period"],
                        definition.get("duty", 0.5),
                        definition.get("low", 0.0),
                        definition.get("high", 1.0),
                    )
                    generated = square_wave(spec, t0, dt, count)
                else:
                    generated = step_signal(
                        definition["t_edge"],
                        t0,
                        dt,
                        count,
                        definition.get("low", 0.0),
                        definition.get("high", 1.0),
                    )
            except InvalidParameter as e:
                raise ConfigError(f"signals.{name}.{e.name}", str(e)) from e
            self._signals[name] = generated
        return self._signals[name]

    def describe(self):
        """One line per block, as the blocks print themselves."""
        return [f"{name}: {self.block(name)!r}" for name in self.config.blocks]
