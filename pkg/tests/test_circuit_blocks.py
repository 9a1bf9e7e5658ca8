"""Tests for the circuit elements and the compensator topologies."""

import numpy as np
import pytest

from circuit_blocks import (
    ADVANCE_COUNT,
    ADVANCE_DT,
    ADVANCE_OMEGA0,
    CompensatorSpec,
    OpAmpModel,
    default_probe_grid,
    gain_feedback_check,
    loop_stability,
    make_compensated_link,
    make_ngd_compensator,
    opamp_block,
    rc_inverse_block,
    rc_lowpass_block,
    rlc_bandpass_block,
    rlc_notch_block,
    stability_probe,
)
from conftest import RC
from errors import InvalidParameter, UnstableLoop
from lti_core import FrequencyGrid, evaluate, evaluate_grid, gain_block
from propagation import apply_filter, measure_peak_advance
from signals import GaussianPulseSpec, gaussian_pulse


@pytest.mark.parametrize(
    "factory, args",
    [
        (rc_lowpass_block, (0.0, 1.0)),
        (rc_lowpass_block, (1.0, float("nan"))),
        (rc_inverse_block, (-1.0, 1.0)),
        (rlc_bandpass_block, (1.0, 0.0, 1.0)),
        (rlc_notch_block, (1.0, 1.0, 1.0, -5.0)),
    ],
)
def test_invalid_component_values(factory, args):
    with pytest.raises(InvalidParameter):
        factory(*args)


def test_rc_inverse_undoes_lowpass():
    omega = np.linspace(0, 1e4, 101)
    product = evaluate(rc_lowpass_block(1000.0, 1e-6), omega) * evaluate(
        rc_inverse_block(1000.0, 1e-6), omega
    )
    np.testing.assert_allclose(product, 1.0, rtol=1e-13)


def test_rlc_bandpass_is_one_at_resonance():
    block = rlc_bandpass_block(0.5, 1.0, 1.0)
    omega0 = block.params["omega0"]
    assert omega0 == 1.0
    assert abs(evaluate(block, omega0) - 1.0) < 1e-15
    assert abs(evaluate(block, 0.0)) == 0.0


def test_rlc_notch_limits():
    R, L, C, R_f = 50.0, 1.0, 1e-4, 450.0
    block = rlc_notch_block(R, L, C, R_f)
    assert evaluate(block, 0.0) == pytest.approx(1.0)
    assert evaluate(block, block.params["omega0"]) == pytest.approx(R / (R + R_f), rel=1e-12)
    assert abs(evaluate(block, 1e9)) == pytest.approx(1.0, rel=1e-6)


def test_notch_inverse_is_bandpass_amplifier():
    """1/F = 1 + (R_f/R) H with H the normalized bandpass."""
    R, L, C, R_f = 50.0, 1.0, 1e-4, 450.0
    omega = np.linspace(0, 500, 257)
    inverse = 1 / evaluate(rlc_notch_block(R, L, C, R_f), omega)
    expected = 1 + (R_f / R) * evaluate(rlc_bandpass_block(R, L, C), omega)
    np.testing.assert_allclose(inverse, expected, rtol=1e-12)


def test_opamp_model():
    model = OpAmpModel(dc_gain=1e5, pole_frequency=20.0)
    assert model.gain_bandwidth == pytest.approx(2e6)
    assert evaluate(opamp_block(model), 20.0) == pytest.approx(1e5 / (1 + 1j))
    with pytest.raises(InvalidParameter):
        OpAmpModel(dc_gain=-1.0, pole_frequency=1.0)
    with pytest.raises(InvalidParameter):
        OpAmpModel(dc_gain=10.0, pole_frequency=0.0)
    assert OpAmpModel(dc_gain=0.0, pole_frequency=1.0).gain_bandwidth == 0.0


def test_default_probe_grid_spans_pole_and_bandwidth():
    grid = default_probe_grid(OpAmpModel(1e6, 10.0))
    assert grid.spacing == "logarithmic"
    assert grid.omega_min == pytest.approx(0.1)
    assert grid.omega_max == pytest.approx(1e9)


def test_canonical_advance_spec_is_stable(advance_spec):
    spec, pulse = advance_spec
    assert spec.feedback_element.params["omega0"] == pytest.approx(2 * np.pi * 30)
    assert ADVANCE_OMEGA0 == pytest.approx(2 * np.pi * 30)
    assert pulse.fwhm == pytest.approx(0.150)
    report = stability_probe(spec)
    assert report.stable
    assert report.winding_number == 0
    assert report.phase_margin > 45


def test_compensator_approaches_ideal_inverse(ideal_rc_spec):
    """With a fast amplifier the loop is 1 + i omega RC well above 1/RC."""
    compensator = make_ngd_compensator(ideal_rc_spec)
    ideal = rc_inverse_block(1000.0, 1e-6)
    omega = np.array([0.1, 1.0, 2.0]) / RC
    error = np.abs(evaluate(compensator, omega) / evaluate(ideal, omega) - 1)
    assert np.max(error) < 1e-3


def test_compensator_has_negative_group_delay(ideal_rc_spec):
    grid = FrequencyGrid.linear(0, 0.5 / RC, 1024)
    spectrum = evaluate_grid(make_ngd_compensator(ideal_rc_spec), grid)
    expected = -RC / (1 + (grid.omega * RC) ** 2)
    np.testing.assert_allclose(spectrum.group_delay[1:-1], expected[1:-1], rtol=1e-2)


def test_positive_feedback_loop_is_rejected():
    spec = CompensatorSpec(gain_block(-2.0), OpAmpModel(dc_gain=10.0, pole_frequency=1.0))
    report = stability_probe(spec)
    assert not report.stable
    assert report.winding_number != 0
    with pytest.raises(UnstableLoop) as excinfo:
        make_ngd_compensator(spec)
    assert excinfo.value.report.winding_number == report.winding_number


def test_marginal_loop_is_not_stable():
    """A loop gain of exactly -1 sits on the critical point."""
    report = loop_stability(gain_block(-1.0), FrequencyGrid.log(1, 10, 50))
    assert not report.stable
    assert report.min_return_difference == 0.0


def test_gain_feedback_check(ideal_rc_spec):
    band = FrequencyGrid.linear(0, 1 / RC, 200)
    report = gain_feedback_check(ideal_rc_spec, band)
    assert report.passed
    assert report.min_loop_gain >= 100
    weak = CompensatorSpec(ideal_rc_spec.feedback_element, OpAmpModel(50.0, 1e6))
    assert not gain_feedback_check(weak, band).passed


def test_compensated_link_is_flat(ideal_rc_spec):
    compensator = make_ngd_compensator(ideal_rc_spec)
    link = make_compensated_link(ideal_rc_spec.feedback_element, compensator)
    omega = np.linspace(0, 1 / RC, 50)
    np.testing.assert_allclose(np.abs(evaluate(link, omega)), 1.0, atol=1e-3)


@pytest.mark.parametrize(
    "fwhm, worst, best", [(0.025, None, 0.5), (0.050, None, 0.1), (0.150, 0.05, 0.0)]
)
def test_notch_compensator_distortion_depends_on_pulse_width(advance_spec, fwhm, worst, best):
    """Pulses narrower than the notch's band are reshaped rather than advanced."""
    spec, pulse = advance_spec
    source = gaussian_pulse(
        GaussianPulseSpec(pulse.center, fwhm), 0.0, ADVANCE_DT, ADVANCE_COUNT
    )
    report = measure_peak_advance(source, apply_filter(make_ngd_compensator(spec), source))
    assert report.distortion_rms > best
    if worst is not None:
        assert report.distortion_rms <= worst
        assert report.peak_advance == pytest.approx(0.0121, rel=0.05)
