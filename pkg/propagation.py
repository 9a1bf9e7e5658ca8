"""
Time-domain propagation of sampled signals through transfer blocks, and the
measurements made on the results: peak advance, rise time, load power and
discontinuity (front) detection.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, signal as sig

from errors import (
    InvalidParameter,
    PeakOnBoundary,
    ThresholdNotCrossed,
    WraparoundContamination,
)
from lti_core import evaluate
from output_manager import OutputManager
from signals import SampledSignal

WRAP_ENERGY_THRESHOLD = 1e-6
PAD_FACTOR = 4
DISCONTINUITY_FRACTION = 0.25
JUMP_CONTRAST = 4.0
REFERENCE_WINDOW = 8


@dataclass(frozen=True)
class DelayReport:
    """Peak and correlation timing of an output against its input (seconds)."""

    peak_in: float
    peak_out: float
    peak_advance: float
    correlation_advance: float
    distortion_rms: float
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class EnergyReport:
    power: SampledSignal
    peak_power_time: float
    cumulative_energy: np.ndarray


def padded_length(count, factor=PAD_FACTOR):
    """Smallest power of two holding factor x count samples."""
    return 1 << int(np.ceil(np.log2(factor * count)))


def apply_filter(block, input_signal, wrap_threshold=WRAP_ENERGY_THRESHOLD):
    """
    Filters a signal by multiplying its zero-padded spectrum with the block response.

    The spectrum is taken with a real FFT, so the product stays Hermitian. The
    last input-length stretch of the padded buffer is where a long response
    tail would wrap into t < t0; its energy share is recorded and guarded.
    """
    count = len(input_signal)
    if count < 16:
        raise InvalidParameter("input length", count, "must be at least 16 samples")
    n_fft = padded_length(count)
    omega = 2 * np.pi * np.fft.rfftfreq(n_fft, input_signal.dt)
    spectrum = np.fft.rfft(input_signal.samples, n_fft) * evaluate(block, omega)
    full = np.fft.irfft(spectrum, n_fft)

    energy = full**2
    total = energy.sum()
    ratio = float(energy[n_fft - count:].sum() / total) if total > 0 else 0.0
    OutputManager().debug(f"apply_filter: n_fft={n_fft}, wrapped energy ratio={ratio:.3e}", 2)
    if ratio > wrap_threshold:
        raise WraparoundContamination(ratio, wrap_threshold)
    return input_signal.with_samples(full[:count], wrap_energy_ratio=ratio, filtered_by=repr(block))


def _parabolic_peak(values, index):
    """Sub-sample offset of a peak from a three-point parabola."""
    left, centre, right = values[index - 1], values[index], values[index + 1]
    curvature = left - 2 * centre + right
    if curvature == 0:
        return 0.0
    return 0.5 * (left - right) / curvature


def _peak_time(signal, which):
    values = signal.samples
    index = int(np.argmax(values))
    if index == 0 or index == len(values) - 1:
        raise PeakOnBoundary(which)
    return signal.time_at(index + _parabolic_peak(values, index)), index


def _normalized(values):
    peak = np.max(np.abs(values))
    return values / peak if peak > 0 else values


def _rms(values):
    return float(np.sqrt(np.mean(values**2)))


def measure_peak_advance(input_signal, output_signal):
    """
    Compares output against input; positive advances mean the output is earlier.

    Peak times come from parabolic interpolation around the maximum sample,
    the correlation advance from the interpolated cross-correlation maximum.
    Distortion is the RMS of the time-aligned, peak-normalized residual
    relative to the RMS of the normalized input.
    """
    if (
        len(input_signal) != len(output_signal)
        or input_signal.dt != output_signal.dt
        or input_signal.t0 != output_signal.t0
    ):
        raise InvalidParameter("signals", "mismatched", "must share t0, dt and length")
    peak_in, index_in = _peak_time(input_signal, "input")
    peak_out, index_out = _peak_time(output_signal, "output")

    x = input_signal.samples
    y = output_signal.samples
    correlation = sig.correlate(y, x, mode="full")
    lags = sig.correlation_lags(len(y), len(x), mode="full")
    best = int(np.argmax(correlation))
    offset = _parabolic_peak(correlation, best) if 0 < best < len(correlation) - 1 else 0.0
    delay = (lags[best] + offset) * input_signal.dt
    correlation_advance = -delay

    times = input_signal.times
    aligned = np.interp(times + delay, times, _normalized(y), left=0.0, right=0.0)
    reference = _normalized(x)
    distortion = _rms(aligned - reference) / _rms(reference)

    return DelayReport(
        peak_in=peak_in,
        peak_out=peak_out,
        peak_advance=peak_in - peak_out,
        correlation_advance=correlation_advance,
        distortion_rms=distortion,
        metadata={
            "peak_method": "parabolic-3-point",
            "peak_index_in": index_in,
            "peak_index_out": index_out,
            "correlation_lag_samples": float(lags[best] + offset),
        },
    )


def _first_crossing(times, values, level, start):
    above = values >= level
    candidates = np.flatnonzero(~above[start:-1] & above[start + 1:])
    if not candidates.size:
        return None
    i = start + int(candidates[0])
    t = (level - values[i]) / (values[i + 1] - values[i])
    return i, times[i] + t * (times[i + 1] - times[i])


def rise_time_10_90(signal, low_level, high_level, edge_window):
    """
    Time between the 10% and 90% crossings of the swing low_level -> high_level.

    Works for falling edges too when low_level > high_level. Crossings are
    located by linear interpolation between bracketing samples.
    """
    if high_level == low_level:
        raise InvalidParameter("high_level", high_level, "must differ from low_level")
    times = signal.times
    mask = (times >= edge_window[0]) & (times <= edge_window[1])
    window_times = times[mask]
    if window_times.size < 2:
        raise InvalidParameter("edge_window", edge_window, "holds fewer than two samples")
    progress = (signal.samples[mask] - low_level) / (high_level - low_level)

    ten = _first_crossing(window_times, progress, 0.1, 0)
    if ten is None:
        raise ThresholdNotCrossed(low_level + 0.1 * (high_level - low_level))
    ninety = _first_crossing(window_times, progress, 0.9, ten[0])
    if ninety is None:
        raise ThresholdNotCrossed(low_level + 0.9 * (high_level - low_level))
    return float(ninety[1] - ten[1])


def settling_check(signal, low_level, high_level, windows):
    """
    True when every (start, end, state) window stays inside its logic band.

    state "HI" needs samples at or above 90% of the swing, "LO" at or below 10%.
    """
    times = signal.times
    swing = high_level - low_level
    for start, end, state in windows:
        mask = (times >= start) & (times <= end)
        progress = (signal.samples[mask] - low_level) / swing
        if state == "HI" and np.any(progress < 0.9):
            return False
        if state == "LO" and np.any(progress > 0.1):
            return False
    return True


def load_power(signal, r_load):
    """Power dissipated by the signal in a load resistor, and its running energy."""
    if not (np.isfinite(r_load) and r_load > 0):
        raise InvalidParameter("r_load", r_load)
    power = signal.samples**2 / r_load
    cumulative = integrate.cumulative_trapezoid(power, dx=signal.dt, initial=0.0)
    peak = int(np.argmax(power))
    return EnergyReport(
        power=signal.with_samples(power, unit="W", r_load=r_load),
        peak_power_time=signal.time_at(peak),
        cumulative_energy=cumulative,
    )


def default_discontinuity_threshold(signal):
    """
    Threshold for a signal's own jump, or None when it has none.

    The largest adjacent-sample difference counts as a jump only when it
    exceeds JUMP_CONTRAST times every difference in the reference window of
    REFERENCE_WINDOW samples before it; the threshold is then
    DISCONTINUITY_FRACTION of that jump. Smooth signals have no threshold.
    """
    steps = np.abs(np.diff(signal.samples))
    index = int(np.argmax(steps))
    largest = float(steps[index])
    if largest == 0:
        return None
    reference = steps[max(0, index - REFERENCE_WINDOW):index]
    if reference.size and largest <= JUMP_CONTRAST * float(reference.max()):
        return None
    return DISCONTINUITY_FRACTION * largest


def detect_discontinuity(signal, threshold=None):
    """
    Time of the last sample before the first adjacent-sample jump above threshold.

    Returns None when no jump qualifies. Without a threshold the signal's own
    one is used (see default_discontinuity_threshold), so smooth signals
    report None.
    """
    if threshold is None:
        threshold = default_discontinuity_threshold(signal)
        if threshold is None:
            return None
    if not threshold > 0:
        raise InvalidParameter("threshold", threshold)
    jumps = np.flatnonzero(np.abs(np.diff(signal.samples)) > threshold)
    if not jumps.size:
        return None
    return signal.time_at(int(jumps[0]))
