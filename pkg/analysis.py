"""
Checks of the structural claims about negative-feedback circuits: the golden
rule, transfer-function inversion, delay cancellation, minimum-phase (Bode)
consistency and the causality of signal fronts.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from errors import GridTooNarrow, InvalidParameter, NonpositiveMagnitude, PoleAtFrequency
from lti_core import Series, compose_feedback, evaluate, evaluate_grid
from propagation import (
    apply_filter,
    default_discontinuity_threshold,
    detect_discontinuity,
    measure_peak_advance,
)
from signals import gaussian_pulse, truncate_at_max

SLOPE_SETTLING_TOLERANCE = 0.1
WARP_RATIO = 10.0


@dataclass(frozen=True, eq=False)
class GoldenRuleReport:
    grid: object
    residual: np.ndarray
    max_residual: float
    bound: np.ndarray
    loop_gain: np.ndarray
    feedback_ratio: np.ndarray


@dataclass(frozen=True, eq=False)
class DelayCancellationReport:
    grid: object
    tau_passive: np.ndarray
    tau_compensator: np.ndarray
    tau_total: np.ndarray

    @property
    def max_abs_total(self):
        return float(np.max(np.abs(self.tau_total)))


@dataclass(frozen=True, eq=False)
class BodeReport:
    grid: object
    phase_measured: np.ndarray
    phase_reconstructed: np.ndarray
    max_band_error: float
    band: tuple


@dataclass(frozen=True)
class FrontReport:
    input_cut: float
    output_cut: Optional[float]
    front_advance: Optional[float]
    pre_cut_match_rms: float
    peak_advance: Optional[float]
    output_threshold: float


def _loop_gain(G, F, omega):
    loop_gain = evaluate(F, omega) * evaluate(G, omega)
    zeros = np.flatnonzero(1 + loop_gain == 0)
    if zeros.size:
        raise PoleAtFrequency(float(omega[zeros[0]]), int(zeros[0]))
    return loop_gain


def golden_rule_residual(G, F, grid):
    """
    How closely the inverting input follows the non-inverting one.

    With B = F T A and T = G/(1 + F G), the relative difference of the two
    inputs is |A - B|/|A| = |1/(1 + F G)|; bound is 1/(|F G| - 1) where |F G| > 1.
    """
    omega = grid.omega
    loop_gain = _loop_gain(G, F, omega)
    residual = np.abs(1 / (1 + loop_gain))
    magnitude = np.abs(loop_gain)
    bound = np.full(magnitude.shape, np.nan)
    above = magnitude > 1
    bound[above] = 1 / (magnitude[above] - 1)
    return GoldenRuleReport(
        grid=grid,
        residual=residual,
        max_residual=float(residual.max()),
        bound=bound,
        loop_gain=loop_gain,
        feedback_ratio=loop_gain / (1 + loop_gain),
    )


def inversion_error(G, F, grid):
    """Largest |T F - 1| over the grid, T being the closed loop of G around F."""
    omega = grid.omega
    closed_loop = evaluate(compose_feedback(G, F), omega)
    return float(np.max(np.abs(closed_loop * evaluate(F, omega) - 1)))


def delay_cancellation_report(passive, compensator, grid):
    """Group delays of a passive element, its compensator, and of their cascade."""
    return DelayCancellationReport(
        grid=grid,
        tau_passive=evaluate_grid(passive, grid).group_delay,
        tau_compensator=evaluate_grid(compensator, grid).group_delay,
        tau_total=evaluate_grid(Series((passive, compensator)), grid).group_delay,
    )


def _loglog_slope(omega, log_mag, low, high):
    i = int(np.searchsorted(omega, low))
    j = int(np.searchsorted(omega, high, side="right")) - 1
    if j <= i or omega[i] <= 0:
        raise GridTooNarrow(f"Grid holds no samples between {low:.4g} and {high:.4g} rad/s")
    return (log_mag[j] - log_mag[i]) / np.log(omega[j] / omega[i])


def minimum_phase_reconstruction(magnitude, grid):
    """
    Minimum phase implied by a magnitude response.

    ln|T| is mapped onto the unit circle with the bilinear warp
    omega = c tan(theta/2), evenly extended to negative frequencies and
    continued past both grid ends along its log-log asymptotes. The phase is
    then -H[ln|T|], with H the FFT Hilbert transform: the negative-quefrency
    half of the real cepstrum is zeroed and the positive half doubled.
    """
    magnitude = np.asarray(magnitude, dtype=float)
    if grid.spacing != "linear":
        raise InvalidParameter("grid.spacing", grid.spacing, "must be linear")
    if magnitude.shape != (grid.count,):
        raise InvalidParameter("magnitude", magnitude.shape, "must match the grid length")
    bad = np.flatnonzero(~(magnitude > 0))
    if bad.size:
        raise NonpositiveMagnitude(int(bad[0]))

    omega = grid.omega
    log_mag = np.log(magnitude)
    top = omega[-1]
    slope_high = _loglog_slope(omega, log_mag, top / 2, top)
    if abs(slope_high - _loglog_slope(omega, log_mag, top / 4, top / 2)) > SLOPE_SETTLING_TOLERANCE:
        raise GridTooNarrow("The magnitude has not reached its asymptote at the grid edge")
    bottom = omega[0]
    slope_low = _loglog_slope(omega, log_mag, bottom, 2 * bottom) if bottom > 0 else 0.0

    def log_magnitude_at(w):
        values = np.interp(w, omega, log_mag)
        beyond = w > top
        values[beyond] = log_mag[-1] + slope_high * np.log(w[beyond] / top)
        if bottom > 0:
            below = w < bottom
            values[below] = log_mag[0] + slope_low * np.log(w[below] / bottom)
        return values

    size = 4 * (1 << int(np.ceil(np.log2(grid.count))))
    warp = top / WARP_RATIO
    theta = 2 * np.pi * np.arange(size // 2 + 1) / size
    step = theta[1]
    warped = warp * np.tan(theta[1:-1] / 2)
    half = np.empty(theta.size)
    half[1:-1] = log_magnitude_at(warped)
    # End bins hold cell averages of the log-asymptotes, finite even where |T| -> 0.
    if bottom > 0:
        half[0] = log_magnitude_at(np.array([warp * np.tan(step / 4)]))[0] - slope_low
    else:
        half[0] = log_mag[0]
    half[-1] = log_magnitude_at(np.array([warp * np.tan((np.pi - step / 2) / 2)]))[0] + slope_high

    cepstrum = np.fft.irfft(half, size)
    folded = np.zeros(size)
    folded[0] = cepstrum[0]
    folded[1:size // 2] = 2 * cepstrum[1:size // 2]
    folded[size // 2] = cepstrum[size // 2]
    phase_on_circle = np.fft.rfft(folded).imag
    return np.interp(2 * np.arctan(omega / warp), theta, phase_on_circle)


def bode_check(block, grid, band):
    """Compares a block's phase with the minimum phase implied by its magnitude over band."""
    low, high = band
    if not 0 <= low < high:
        raise InvalidParameter("band", band, "needs 0 <= low < high")
    if grid.omega_max < 10 * high:
        raise GridTooNarrow(
            f"Grid ends at {grid.omega_max:.4g} rad/s, below 10x the band edge {high:.4g}"
        )
    spectrum = evaluate_grid(block, grid)
    reconstructed = minimum_phase_reconstruction(spectrum.magnitude, grid)
    omega = grid.omega
    in_band = (omega >= low) & (omega <= high)
    if not np.any(in_band):
        raise InvalidParameter("band", band, "holds no grid points")
    difference = np.angle(np.exp(1j * (spectrum.phase_unwrapped - reconstructed)))
    return BodeReport(
        grid=grid,
        phase_measured=spectrum.phase_unwrapped,
        phase_reconstructed=reconstructed,
        max_band_error=float(np.max(np.abs(difference[in_band]))),
        band=(float(low), float(high)),
    )


def causality_front_test(block, pulse, t0, dt, count):
    """
    Shorts a Gaussian at its peak and checks that the block does not advance the cut.

    The output is searched with the input's jump threshold scaled by the
    block's gain on the full pulse (ratio of the output to input peaks), so a
    smooth output never registers as a front; output_cut is None when no jump
    reaches it. front_advance is input_cut - output_cut, positive when the
    output front is earlier. pre_cut_match_rms compares the outputs for the
    truncated and full pulses before the cut, relative to the RMS of the
    full-pulse output there.
    """
    full = gaussian_pulse(pulse, t0, dt, count)
    truncated, cut_time = truncate_at_max(full)
    full_output = apply_filter(block, full)
    truncated_output = apply_filter(block, truncated)

    input_threshold = default_discontinuity_threshold(truncated)
    if input_threshold is None:
        raise InvalidParameter("pulse", pulse, "shorting at the peak leaves no jump to track")
    input_cut = detect_discontinuity(truncated, input_threshold)
    gain = np.max(np.abs(full_output.samples)) / np.max(np.abs(full.samples))
    threshold = input_threshold * gain
    output_cut = detect_discontinuity(truncated_output, threshold) if threshold > 0 else None
    front_advance = None if output_cut is None else input_cut - output_cut

    before = slice(0, truncated.metadata["cut_index"])
    reference = full_output.samples[before]
    scale = np.sqrt(np.mean(reference**2))
    mismatch = truncated_output.samples[before] - reference
    match = float(np.sqrt(np.mean(mismatch**2)) / scale) if scale > 0 else 0.0

    return FrontReport(
        input_cut=input_cut,
        output_cut=output_cut,
        front_advance=front_advance,
        pre_cut_match_rms=match,
        peak_advance=measure_peak_advance(full, full_output).peak_advance,
        output_threshold=float(threshold),
    )
