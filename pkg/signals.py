"""
Sampled voltage waveforms and the generators used by the pulse experiments.
"""

from dataclasses import dataclass, field

import numpy as np

from errors import InvalidParameter
from output_manager import OutputManager


@dataclass(frozen=True, eq=False)
class SampledSignal:
    """Uniformly sampled real waveform; t0 is the time of the first sample."""

    t0: float
    dt: float
    samples: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if not self.dt > 0:
            raise InvalidParameter("dt", self.dt)
        if samples.ndim != 1 or samples.size < 2:
            raise InvalidParameter("samples", samples.shape, "needs at least 2 samples")
        if not np.all(np.isfinite(samples)):
            raise InvalidParameter("samples", "non-finite", "must be finite")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.size

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(self.samples.size)

    @property
    def energy(self):
        """Sum of squared samples times dt (V^2 s)."""
        return float(np.sum(self.samples**2) * self.dt)

    def time_at(self, index):
        return self.t0 + self.dt * index

    def with_samples(self, samples, **metadata):
        merged = dict(self.metadata)
        merged.update(metadata)
        return SampledSignal(self.t0, self.dt, samples, merged)


@dataclass(frozen=True)
class GaussianPulseSpec:
    center: float
    fwhm: float
    amplitude: float = 1.0

    def __post_init__(self):
        if not self.fwhm > 0:
            raise InvalidParameter("fwhm", self.fwhm)


@dataclass(frozen=True)
class SquareWaveSpec:
    period: float
    duty: float = 0.5
    low: float = 0.0
    high: float = 1.0

    def __post_init__(self):
        if not self.period > 0:
            raise InvalidParameter("period", self.period)
        if not 0 < self.duty < 1:
            raise InvalidParameter("duty", self.duty, "must lie in (0, 1)")
        if not self.high > self.low:
            raise InvalidParameter("high", self.high, "must exceed low")


def _check_sampling(dt, count, minimum):
    if not dt > 0:
        raise InvalidParameter("dt", dt)
    if int(count) != count or count < minimum:
        raise InvalidParameter("count", count, f"must be an integer >= {minimum}")


def gaussian_pulse(spec, t0, dt, count):
    """Gaussian pulse parameterized by its full width at half maximum."""
    _check_sampling(dt, count, 16)
    times = t0 + dt * np.arange(int(count))
    samples = spec.amplitude * np.exp(-4 * np.log(2) * ((times - spec.center) / spec.fwhm) ** 2)
    covered = (
        times[0] <= spec.center - 5 * spec.fwhm and times[-1] >= spec.center + 5 * spec.fwhm
    )
    if not covered:
        OutputManager().debug(
            f"Window [{times[0]:.4g}, {times[-1]:.4g}] s does not cover the pulse "
            f"center +/- 5 FWHM"
        )
    return SampledSignal(
        t0, dt, samples, {"kind": "gaussian", "window_covers_pulse": bool(covered)}
    )


def square_wave(spec, t0, dt, count):
    """Square wave with a rising edge at t=0; each period starts high for duty*period."""
    _check_sampling(dt, count, 2)
    if spec.period < 10 * dt:
        raise InvalidParameter("period", spec.period, "must span at least 10 samples")
    times = t0 + dt * np.arange(int(count))
    phase = np.mod(times, spec.period) / spec.period
    samples = np.where(phase < spec.duty, spec.high, spec.low).astype(float)
    return SampledSignal(t0, dt, samples, {"kind": "square"})


def step_signal(t_edge, t0, dt, count, low=0.0, high=1.0):
    """Step from low to high; the first high sample is the first at or after t_edge."""
    _check_sampling(dt, count, 2)
    times = t0 + dt * np.arange(int(count))
    samples = np.where(times >= t_edge - 1e-9 * dt, high, low).astype(float)
    return SampledSignal(t0, dt, samples, {"kind": "step", "t_edge": t_edge})


def truncate_at_max(signal):
    """
    Shorts the signal to zero right after its maximum sample.

    Ties at the maximum resolve to the earliest index, recorded in metadata.
    Returns (truncated signal, cut time).
    """
    samples = signal.samples
    index = int(np.argmax(samples))
    ties = int(np.count_nonzero(samples == samples[index]))
    truncated = samples.copy()
    truncated[index + 1:] = 0.0
    cut_time = signal.time_at(index)
    result = signal.with_samples(
        truncated, cut_index=index, cut_time=cut_time, max_ties=ties
    )
    return result, cut_time
