"""
Complex transfer functions of linear time-invariant blocks.

A block is evaluated at angular frequency omega (rad/s) under the convention
that a causal delay of tau seconds responds as exp(-1j*omega*tau). Phase is
stored as arg T and group delay is reported as -d(arg T)/d(omega), so a
physical delay is positive and an advance negative.
"""

from dataclasses import dataclass, field
from types import MappingProxyType

import numpy as np

from errors import GridTooCoarse, InvalidParameter, PoleAtFrequency
from signals import SampledSignal


@dataclass(frozen=True)
class FrequencyGrid:
    """Sampling of the angular frequency axis, linear or logarithmic."""

    omega_min: float
    omega_max: float
    count: int
    spacing: str = "linear"

    def __post_init__(self):
        if not (np.isfinite(self.omega_min) and np.isfinite(self.omega_max)):
            raise InvalidParameter("grid", (self.omega_min, self.omega_max), "must be finite")
        if not 0 <= self.omega_min < self.omega_max:
            raise InvalidParameter(
                "grid", (self.omega_min, self.omega_max), "needs 0 <= omega_min < omega_max"
            )
        if int(self.count) != self.count or self.count < 2:
            raise InvalidParameter("grid.count", self.count, "must be an integer >= 2")
        if self.spacing not in ("linear", "logarithmic"):
            raise InvalidParameter("grid.spacing", self.spacing, "must be linear or logarithmic")
        if self.spacing == "logarithmic" and self.omega_min == 0:
            raise InvalidParameter("grid.omega_min", 0.0, "logarithmic grids start above zero")

    @classmethod
    def linear(cls, omega_min, omega_max, count):
        return cls(float(omega_min), float(omega_max), int(count), "linear")

    @classmethod
    def log(cls, omega_min, omega_max, count):
        return cls(float(omega_min), float(omega_max), int(count), "logarithmic")

    @property
    def omega(self):
        if self.spacing == "linear":
            return np.linspace(self.omega_min, self.omega_max, self.count)
        return np.geomspace(self.omega_min, self.omega_max, self.count)


@dataclass(frozen=True, eq=False)
class SpectrumAnalysis:
    """Magnitude, unwrapped phase and group delay of a block on a grid."""

    grid: FrequencyGrid
    response: np.ndarray
    magnitude: np.ndarray
    phase_unwrapped: np.ndarray
    group_delay: np.ndarray


def _check_denominator(denominator, omega):
    zeros = np.flatnonzero(np.atleast_1d(denominator) == 0)
    if zeros.size:
        if np.ndim(omega) == 0:
            raise PoleAtFrequency(float(omega))
        index = int(zeros[0])
        raise PoleAtFrequency(float(np.atleast_1d(omega)[index]), index)


class TransferBlock:
    """Base class of every evaluable frequency response."""

    def response(self, omega):
        """Complex response at an array of angular frequencies."""
        raise NotImplementedError

    def __call__(self, omega):
        return evaluate(self, omega)


@dataclass(frozen=True)
class Identity(TransferBlock):
    def response(self, omega):
        return np.ones_like(omega, dtype=complex)


@dataclass(frozen=True)
class PureDelay(TransferBlock):
    tau: float

    def __post_init__(self):
        if not np.isfinite(self.tau):
            raise InvalidParameter("tau", self.tau, "must be finite")

    def response(self, omega):
        return np.exp(-1j * omega * self.tau)


@dataclass(frozen=True, eq=False)
class Primitive(TransferBlock):
    """
    A named element with parameters whose response is numerator/denominator.

    numerator and denominator are vectorized callables of omega; a missing
    denominator means the element is a polynomial in omega.
    """

    name: str
    params: MappingProxyType
    numerator: object
    denominator: object = None

    def __post_init__(self):
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))

    def response(self, omega):
        num = np.asarray(self.numerator(omega), dtype=complex)
        if self.denominator is None:
            return num * np.ones_like(omega, dtype=complex)
        den = np.asarray(self.denominator(omega), dtype=complex)
        _check_denominator(den, omega)
        return num / den

    def __repr__(self):
        args = ", ".join(f"{key}={value!r}" for key, value in self.params.items())
        return f"{self.name}({args})"


@dataclass(frozen=True)
class Series(TransferBlock):
    """Cascade of blocks; the response is the product of member responses."""

    members: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))

    def response(self, omega):
        total = np.ones_like(omega, dtype=complex)
        for member in self.members:
            total = total * member.response(omega)
        return total


@dataclass(frozen=True)
class FeedbackLoop(TransferBlock):
    """Negative feedback: forward G with F fed back, T = G / (1 + F G)."""

    forward: TransferBlock
    feedback: TransferBlock

    def response(self, omega):
        g = self.forward.response(omega)
        f = self.feedback.response(omega)
        den = 1 + f * g
        _check_denominator(den, omega)
        return g / den


def gain_block(value):
    """Constant gain; 0 and negative values are allowed."""
    value = float(value)
    if not np.isfinite(value):
        raise InvalidParameter("gain", value, "must be finite")
    return Primitive("gain", {"value": value}, lambda w: np.full(np.shape(w), value, complex))


def evaluate(block, omega):
    """Response of block at omega (scalar or array)."""
    w = np.asarray(omega, dtype=float)
    if not np.all(np.isfinite(w)):
        raise InvalidParameter("omega", omega, "must be finite")
    result = block.response(w)
    if np.ndim(w) == 0:
        return complex(result)
    return result


def compose_feedback(forward, feedback):
    return FeedbackLoop(forward, feedback)


def unwrap_phase(response):
    """Continuous arg of a response, anchored at the first sample's principal value."""
    return np.unwrap(np.angle(response))


def group_delay_curve(phase_unwrapped, grid):
    """
    Group delay -d(phase)/d(omega) in seconds.

    Central differences at interior points and one-sided differences at the
    two ends, following the grid spacing.
    """
    phase = np.asarray(phase_unwrapped, dtype=float)
    if grid.count < 3:
        raise InvalidParameter("grid.count", grid.count, "group delay needs at least 3 points")
    if phase.shape != (grid.count,):
        raise InvalidParameter("phase_unwrapped", phase.shape, "must match the grid length")
    steps = np.flatnonzero(np.abs(np.diff(phase)) > np.pi / 2)
    if steps.size:
        raise GridTooCoarse(int(steps[0]))
    return -np.gradient(phase, grid.omega, edge_order=1)


def evaluate_grid(block, grid):
    """Evaluates a block over a grid and derives magnitude, phase and group delay."""
    response = evaluate(block, grid.omega)
    phase = unwrap_phase(response)
    return SpectrumAnalysis(
        grid=grid,
        response=response,
        magnitude=np.abs(response),
        phase_unwrapped=phase,
        group_delay=group_delay_curve(phase, grid),
    )


def impulse_response(block, sample_count, dt):
    """
    Impulse response sampled every dt seconds, scaled to approximate h(t).

    The response is sampled on the real-FFT grid so the inverse transform is
    Hermitian by construction; t=0 is index 0 and negative times wrap to the
    upper half of the buffer.
    """
    sample_count = int(sample_count)
    if sample_count < 64 or sample_count & (sample_count - 1):
        raise InvalidParameter("sample_count", sample_count, "must be a power of two >= 64")
    if not dt > 0:
        raise InvalidParameter("dt", dt)
    omega = 2 * np.pi * np.fft.rfftfreq(sample_count, dt)
    spectrum = evaluate(block, omega)
    samples = np.fft.irfft(spectrum, sample_count) / dt
    return SampledSignal(0.0, dt, samples, {"kind": "impulse_response"})


def negative_time_energy_ratio(signal):
    """Share of energy an impulse response carries in its wrapped negative-time half."""
    energy = np.asarray(signal.samples) ** 2
    total = energy.sum()
    if total == 0:
        return 0.0
    return float(energy[len(energy) // 2:].sum() / total)
