"""
Circuit elements and the negative-feedback compensator topologies.

The compensator closes an op-amp loop around a passive element F so that
T = G / (1 + F G) approaches 1/F wherever the gain-feedback product |F G|
is large; placed after a matched copy of F it cancels the element's delay.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from errors import GridTooCoarse, InvalidParameter, UnstableLoop
from lti_core import FrequencyGrid, Primitive, Series, TransferBlock, compose_feedback, evaluate
from output_manager import OutputManager
from signals import GaussianPulseSpec

MARGINAL_RETURN_DIFFERENCE = 1e-6
DEFAULT_GAIN_FEEDBACK_THRESHOLD = 100.0


def _require_positive(**values):
    for name, value in values.items():
        if not (np.isfinite(value) and value > 0):
            raise InvalidParameter(name, value)


def rc_lowpass_block(R, C):
    """First-order low-pass 1 / (1 + i w R C)."""
    _require_positive(R=R, C=C)
    tau = R * C
    return Primitive(
        "rc_lowpass",
        {"R": R, "C": C},
        numerator=lambda w: np.ones_like(w, dtype=complex),
        denominator=lambda w: 1 + 1j * w * tau,
    )


def rc_inverse_block(R, C):
    """The ideal compensator 1 + i w R C, the exact inverse of rc_lowpass_block."""
    _require_positive(R=R, C=C)
    tau = R * C
    return Primitive("rc_inverse", {"R": R, "C": C}, numerator=lambda w: 1 + 1j * w * tau)


def rlc_bandpass_block(R, L, C):
    """
    Series-RLC voltage divider taken across R: i w R C / (1 - w^2 L C + i w R C).

    The response is exactly 1 at omega0 = 1/sqrt(L C) (stored in params) and the
    group delay there is 2 L / R.
    """
    _require_positive(R=R, L=L, C=C)
    omega0 = 1.0 / np.sqrt(L * C)
    tau = R * C

    def detuning(w):
        x = w / omega0
        return (1 - x) * (1 + x)

    return Primitive(
        "rlc_bandpass",
        {"R": R, "L": L, "C": C, "omega0": omega0},
        numerator=lambda w: 1j * w * tau,
        denominator=lambda w: detuning(w) + 1j * w * tau,
    )


def rlc_notch_block(R, L, C, R_f):
    """
    Series resistor R_f feeding a shunt series-RLC branch, output across the branch.

    F = 1 / (1 + (R_f/R) H) with H the rlc_bandpass_block response, so F(0) = 1
    and F dips to R/(R+R_f) at resonance. Inverted by a feedback loop it becomes
    the tuned bandpass amplifier 1 + (R_f/R) H, whose group delay at low
    frequency is -R_f C.
    """
    _require_positive(R=R, L=L, C=C, R_f=R_f)
    omega0 = 1.0 / np.sqrt(L * C)

    def detuning(w):
        x = w / omega0
        return (1 - x) * (1 + x)

    return Primitive(
        "rlc_notch",
        {"R": R, "L": L, "C": C, "R_f": R_f, "omega0": omega0},
        numerator=lambda w: detuning(w) + 1j * w * R * C,
        denominator=lambda w: detuning(w) + 1j * w * (R + R_f) * C,
    )


@dataclass(frozen=True)
class OpAmpModel:
    """Single dominant pole amplifier G(w) = dc_gain / (1 + i w / pole_frequency)."""

    dc_gain: float
    pole_frequency: float

    def __post_init__(self):
        if not (np.isfinite(self.dc_gain) and self.dc_gain >= 0):
            raise InvalidParameter("dc_gain", self.dc_gain, "must be finite and >= 0")
        _require_positive(pole_frequency=self.pole_frequency)

    @property
    def gain_bandwidth(self):
        return self.dc_gain * self.pole_frequency


def opamp_block(model):
    dc_gain = float(model.dc_gain)
    pole = float(model.pole_frequency)
    return Primitive(
        "opamp",
        {"dc_gain": dc_gain, "pole_frequency": pole},
        numerator=lambda w: np.full(np.shape(w), dc_gain, dtype=complex),
        denominator=lambda w: 1 + 1j * w / pole,
    )


@dataclass(frozen=True)
class CompensatorSpec:
    """The feedback element F (black box of the loop) and the amplifier G."""

    feedback_element: TransferBlock
    amplifier: OpAmpModel


@dataclass(frozen=True)
class GainFeedbackReport:
    min_loop_gain: float
    worst_frequency: float
    threshold: float
    passed: bool


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    winding_number: Optional[int]
    min_return_difference: float
    worst_frequency: float
    phase_margin: Optional[float]
    crossover_frequency: Optional[float]


def loop_block(spec):
    """The open-loop gain F G as a block."""
    return Series((spec.feedback_element, opamp_block(spec.amplifier)))


def default_probe_grid(model, count=8000):
    """Log grid spanning [pole/100, 100 x gain-bandwidth]."""
    upper = 100 * max(model.gain_bandwidth, model.pole_frequency)
    return FrequencyGrid.log(model.pole_frequency / 100, upper, count)


def _winding_number(return_difference):
    # Close the sampled locus through its mirror image at negative frequencies.
    contour = np.concatenate([np.conj(return_difference[::-1]), return_difference])
    closed = np.append(contour, contour[0])
    turns = np.angle(closed[1:] / closed[:-1])
    coarse = np.flatnonzero(np.abs(turns) > np.pi / 2)
    if coarse.size:
        index = int(coarse[0]) - return_difference.size
        raise GridTooCoarse(index, "locus points subtend more than pi/2 about -1")
    return int(np.rint(turns.sum() / (2 * np.pi)))


def _phase_margin(omega, loop_gain):
    magnitude = np.abs(loop_gain)
    crossings = np.flatnonzero((magnitude[:-1] >= 1) & (magnitude[1:] < 1))
    if not crossings.size:
        return None, None
    i = int(crossings[0])
    phase = np.degrees(np.unwrap(np.angle(loop_gain)))
    t = (magnitude[i] - 1) / (magnitude[i] - magnitude[i + 1])
    crossover = omega[i] + t * (omega[i + 1] - omega[i])
    phase_at_crossover = phase[i] + t * (phase[i + 1] - phase[i])
    return float(180 + phase_at_crossover), float(crossover)


def loop_stability(loop_gain_block, grid):
    """
    Nyquist test on a sampled loop gain.

    Stable when the locus, closed by conjugate symmetry, does not encircle -1
    and stays farther than MARGINAL_RETURN_DIFFERENCE from it.
    """
    omega = grid.omega
    loop_gain = evaluate(loop_gain_block, omega)
    return_difference = 1 + loop_gain
    distance = np.abs(return_difference)
    worst = int(np.argmin(distance))
    min_distance = float(distance[worst])
    winding = _winding_number(return_difference) if min_distance > 0 else None
    phase_margin, crossover = _phase_margin(omega, loop_gain)
    stable = winding == 0 and min_distance > MARGINAL_RETURN_DIFFERENCE
    OutputManager().debug(
        f"Nyquist probe: winding={winding}, min|1+FG|={min_distance:.3e}, "
        f"phase margin={phase_margin}"
    )
    return StabilityReport(
        stable=stable,
        winding_number=winding,
        min_return_difference=min_distance,
        worst_frequency=float(omega[worst]),
        phase_margin=phase_margin,
        crossover_frequency=crossover,
    )


def stability_probe(spec, grid=None):
    """Stability of the closed loop built from spec, see loop_stability."""
    if grid is None:
        grid = default_probe_grid(spec.amplifier)
    else:
        recommended = default_probe_grid(spec.amplifier)
        if grid.omega_min > recommended.omega_min or grid.omega_max < recommended.omega_max:
            OutputManager().warning(
                "Stability probe grid does not span [pole/100, 100 x gain-bandwidth]"
            )
    return loop_stability(loop_block(spec), grid)


def make_ngd_compensator(spec, grid=None):
    """Op-amp loop around spec.feedback_element; raises UnstableLoop if the probe fails."""
    report = stability_probe(spec, grid)
    if not report.stable:
        raise UnstableLoop(report)
    return compose_feedback(opamp_block(spec.amplifier), spec.feedback_element)


def make_compensated_link(passive, compensator):
    return Series((passive, compensator))


def gain_feedback_check(spec, band, threshold=DEFAULT_GAIN_FEEDBACK_THRESHOLD):
    """Checks |F G| >= threshold over the band; report only, never raises."""
    omega = band.omega
    product = np.abs(evaluate(loop_block(spec), omega))
    worst = int(np.argmin(product))
    min_product = float(product[worst])
    return GainFeedbackReport(
        min_loop_gain=min_product,
        worst_frequency=float(omega[worst]),
        threshold=threshold,
        passed=min_product >= threshold,
    )


# Pulse-advance reproduction: tank resonant at 30 Hz, low-frequency advance
# R_f C chosen so a 150 ms FWHM Gaussian peak leaves 12.1 ms early.
ADVANCE_OMEGA0 = 2 * np.pi * 30.0
ADVANCE_C = 10e-6
ADVANCE_L = 1.0 / (ADVANCE_OMEGA0**2 * ADVANCE_C)
ADVANCE_R = 50.0
ADVANCE_R_F = 1255.0
ADVANCE_FWHM = 0.150
ADVANCE_DT = 0.5e-3
ADVANCE_COUNT = 4096


def canonical_advance_spec():
    """Compensator spec and input pulse of the pulse-advance scenario."""
    spec = CompensatorSpec(
        feedback_element=rlc_notch_block(ADVANCE_R, ADVANCE_L, ADVANCE_C, ADVANCE_R_F),
        amplifier=OpAmpModel(dc_gain=1e6, pole_frequency=10.0),
    )
    pulse = GaussianPulseSpec(center=ADVANCE_DT * ADVANCE_COUNT / 2, fwhm=ADVANCE_FWHM)
    return spec, pulse
