"""Tests for FFT filtering and the timing measurements."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from circuit_blocks import rc_lowpass_block
from errors import InvalidParameter, PeakOnBoundary, ThresholdNotCrossed, WraparoundContamination
from lti_core import Identity, PureDelay
from propagation import (
    apply_filter,
    default_discontinuity_threshold,
    detect_discontinuity,
    load_power,
    measure_peak_advance,
    padded_length,
    rise_time_10_90,
    settling_check,
)
from signals import GaussianPulseSpec, SampledSignal, gaussian_pulse, step_signal, truncate_at_max

DT = 1e-3
COUNT = 1024


@pytest.fixture
def pulse():
    return gaussian_pulse(GaussianPulseSpec(center=0.512, fwhm=0.05), 0.0, DT, COUNT)


def test_padded_length():
    assert padded_length(1024) == 4096
    assert padded_length(1000) == 4096
    assert padded_length(1025) == 8192


def test_identity_filter_returns_input(pulse):
    output = apply_filter(Identity(), pulse)
    np.testing.assert_allclose(output.samples, pulse.samples, atol=1e-12)
    assert output.metadata["wrap_energy_ratio"] <= 1e-20
    assert output.t0 == pulse.t0 and output.dt == pulse.dt


def test_delay_by_three_samples(pulse):
    output = apply_filter(PureDelay(3 * DT), pulse)
    report = measure_peak_advance(pulse, output)
    assert report.peak_advance == pytest.approx(-3 * DT, abs=1e-9)
    assert report.correlation_advance == pytest.approx(-3 * DT, abs=1e-9)
    assert report.distortion_rms < 1e-6
    assert report.metadata["peak_index_out"] - report.metadata["peak_index_in"] == 3


def test_identity_measures_zero_advance(pulse):
    report = measure_peak_advance(pulse, pulse)
    assert report.peak_advance == 0.0
    assert report.correlation_advance == pytest.approx(0.0, abs=1e-12)
    assert report.distortion_rms == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(a=st.floats(-10, 10), b=st.floats(-10, 10))
def test_filter_is_linear(a, b):
    block = rc_lowpass_block(2 * DT, 1.0)
    x = gaussian_pulse(GaussianPulseSpec(0.3, 0.04), 0.0, DT, COUNT)
    y = gaussian_pulse(GaussianPulseSpec(0.6, 0.02), 0.0, DT, COUNT)
    combined = apply_filter(block, x.with_samples(a * x.samples + b * y.samples))
    separate = a * apply_filter(block, x).samples + b * apply_filter(block, y).samples
    np.testing.assert_allclose(combined.samples, separate, atol=1e-9 * (abs(a) + abs(b) + 1))


def test_large_advance_wraps_around(pulse):
    """Advancing the pulse past t0 folds it into the end of the padded buffer."""
    with pytest.raises(WraparoundContamination) as excinfo:
        apply_filter(PureDelay(-0.6), pulse)
    assert excinfo.value.ratio > 0.5


def test_short_input_rejected():
    with pytest.raises(InvalidParameter):
        apply_filter(Identity(), SampledSignal(0.0, 1.0, np.ones(8)))


def test_peak_on_boundary():
    ramp = SampledSignal(0.0, DT, np.linspace(0, 1, 64))
    with pytest.raises(PeakOnBoundary) as excinfo:
        measure_peak_advance(ramp, ramp)
    assert excinfo.value.which == "input"


def test_mismatched_signals_rejected(pulse):
    shifted = SampledSignal(pulse.t0 + DT, DT, pulse.samples)
    with pytest.raises(InvalidParameter):
        measure_peak_advance(pulse, shifted)


def test_ideal_step_rise_time():
    """Linear interpolation puts 10% and 90% of a one-sample jump 0.8 dt apart."""
    step = step_signal(0.01, 0.0, DT, 64)
    assert rise_time_10_90(step, 0.0, 1.0, (0.0, 0.05)) == pytest.approx(0.8 * DT)


def test_falling_edge_rise_time():
    step = step_signal(0.01, 0.0, DT, 64, low=1.0, high=0.0)
    assert rise_time_10_90(step, 1.0, 0.0, (0.0, 0.05)) == pytest.approx(0.8 * DT)


def test_rc_step_rise_time():
    """An RC line rises 10%-90% in RC ln 9."""
    rc, dt = 1e-3, 1e-5
    step = step_signal(1e-3, 0.0, dt, 4096)
    output = apply_filter(rc_lowpass_block(rc, 1.0), step)
    rise = rise_time_10_90(output, 0.0, 1.0, (0.0, 0.02))
    assert rise == pytest.approx(rc * np.log(9), rel=0.01)


def test_rise_threshold_not_crossed():
    flat = SampledSignal(0.0, DT, np.full(64, 0.05))
    with pytest.raises(ThresholdNotCrossed):
        rise_time_10_90(flat, 0.0, 1.0, (0.0, 0.05))
    with pytest.raises(InvalidParameter):
        rise_time_10_90(flat, 1.0, 1.0, (0.0, 0.05))


def test_settling_check():
    samples = np.concatenate([np.full(10, 0.02), np.full(10, 0.95), np.full(10, 0.5)])
    signal = SampledSignal(0.0, 1.0, samples)
    assert settling_check(signal, 0.0, 1.0, [(0, 9, "LO"), (10, 19, "HI")])
    assert not settling_check(signal, 0.0, 1.0, [(10, 25, "HI")])
    assert not settling_check(signal, 0.0, 1.0, [(15, 25, "LO")])


def test_load_power_of_constant_voltage():
    signal = SampledSignal(0.0, 0.01, np.ones(11))
    report = load_power(signal, 1.0)
    np.testing.assert_allclose(report.cumulative_energy, 0.01 * np.arange(11), atol=1e-15)
    np.testing.assert_array_equal(report.power.samples, np.ones(11))
    assert report.power.metadata["unit"] == "W"


def test_peak_power_coincides_with_peak_voltage(pulse):
    report = load_power(pulse, 50.0)
    assert report.peak_power_time == pulse.time_at(int(np.argmax(pulse.samples)))
    assert report.cumulative_energy[-1] == pytest.approx(pulse.energy / 50.0, rel=1e-3)
    with pytest.raises(InvalidParameter):
        load_power(pulse, 0.0)


def test_detect_discontinuity():
    """A pulse shorted after its peak jumps between the peak sample and the next."""
    signal = SampledSignal(2.0, 0.5, np.array([0.0, 0.1, 0.3, 0.6, 1.0, 0.0, 0.0, 0.0]))
    assert detect_discontinuity(signal, threshold=0.5) == pytest.approx(2.0 + 4 * 0.5)
    step = step_signal(0.01, 0.0, DT, 64)
    assert detect_discontinuity(step) == pytest.approx(9 * DT)


def test_smooth_signal_has_no_discontinuity(pulse):
    assert detect_discontinuity(pulse) is None
    assert default_discontinuity_threshold(pulse) is None
    largest = np.max(np.abs(np.diff(pulse.samples)))
    assert detect_discontinuity(pulse, threshold=10 * largest) is None
    with pytest.raises(InvalidParameter):
        detect_discontinuity(pulse, threshold=0.0)


def test_shorted_pulse_jumps_at_the_cut():
    pulse = gaussian_pulse(GaussianPulseSpec(center=1.024, fwhm=0.15), 0.0, DT, 2048)
    truncated, cut_time = truncate_at_max(pulse)
    assert default_discontinuity_threshold(truncated) == pytest.approx(0.25, rel=1e-3)
    assert detect_discontinuity(truncated) == cut_time


def test_rc_kink_is_not_a_jump():
    """A slow RC turns the shorted edge into a kink; no front is reported."""
    pulse = gaussian_pulse(GaussianPulseSpec(center=1.024, fwhm=0.15), 0.0, DT, 2048)
    truncated, _ = truncate_at_max(pulse)
    output = apply_filter(rc_lowpass_block(0.05, 1.0), truncated)
    assert detect_discontinuity(output) is None
    assert detect_discontinuity(output, threshold=0.25) is None
