"""
This module defines the exceptions raised by the ngdSim simulator.
All of them derive from NgdError so callers can catch the whole family.
"""


class NgdError(Exception):
    """Base class for every error raised by the simulator."""


class InvalidParameter(NgdError):
    """A block, signal or grid parameter is outside its valid range."""

    def __init__(self, name, value, reason="must be positive"):
        self.name = name
        self.value = value
        super().__init__(f"Invalid parameter {name}={value!r}: {reason}")


class PoleAtFrequency(NgdError):
    """A response denominator is exactly zero at the requested frequency."""

    def __init__(self, omega, index=None):
        self.omega = omega
        self.index = index
        where = f" (grid index {index})" if index is not None else ""
        super().__init__(f"Pole at omega={omega!r} rad/s{where}")


class GridTooCoarse(NgdError):
    """Adjacent samples are too far apart to be unwrapped unambiguously."""

    def __init__(self, index, message="adjacent samples differ by more than pi/2"):
        self.index = index
        super().__init__(f"Grid too coarse at index {index}: {message}")


class GridTooNarrow(NgdError):
    """The frequency grid does not extend far enough beyond the band of interest."""


class NonpositiveMagnitude(NgdError):
    """A magnitude sample is zero or negative where a logarithm is needed."""

    def __init__(self, index):
        self.index = index
        super().__init__(f"Magnitude is not strictly positive at grid index {index}")


class UnstableLoop(NgdError):
    """The closed feedback loop fails the stability probe."""

    def __init__(self, report):
        self.report = report
        super().__init__(
            f"Feedback loop is unstable or marginal: winding={report.winding_number}, "
            f"min |1+FG|={report.min_return_difference:.3e}"
        )


class WraparoundContamination(NgdError):
    """Circular convolution wrapped too much energy back into the window."""

    def __init__(self, ratio, threshold):
        self.ratio = ratio
        self.threshold = threshold
        super().__init__(
            f"Wrapped tail energy ratio {ratio:.3e} exceeds threshold {threshold:.1e}"
        )


class PeakOnBoundary(NgdError):
    """A signal maximum sits on the first or last sample."""

    def __init__(self, which):
        self.which = which
        super().__init__(f"The {which} signal has its maximum on the window boundary")


class ThresholdNotCrossed(NgdError):
    """A rise-time threshold is never crossed inside the edge window."""

    def __init__(self, level):
        self.level = level
        super().__init__(f"Signal never crosses {level:.4g} inside the edge window")


class ConfigError(NgdError):
    """A scenario document is malformed; path names the offending field."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class StepError(NgdError):
    """A simulation error raised while executing one pipeline step."""

    def __init__(self, index, kind, error):
        self.index = index
        self.kind = kind
        self.error = error
        super().__init__(f"pipeline[{index}] ({kind}): {type(error).__name__}: {error}")


class ExpectationFailed(NgdError):
    """One or more declared scenario expectations did not hold."""

    def __init__(self, scenario, failures):
        self.scenario = scenario
        self.failures = failures
        super().__init__(f"Scenario {scenario}: {len(failures)} expectation(s) failed")
