"""Physical time axis, durations and edge-captured timestamps.

Everything on the simulation time axis is an integer count of picoseconds.
Timestamps are what a counter sees: whole periods of its driving frequency.
The sub-period remainder is carried separately as a :class:`PhaseFraction`.
"""

from __future__ import annotations

from dataclasses import dataclass

PS_PER_S = 10**12
PS_PER_MS = 10**9
PS_PER_US = 10**6
PS_PER_NS = 10**3

# Signed 64-bit range; comfortably covers the required +/-1e18 ps.
MAX_PS = 2**63 - 1
MIN_PS = -(2**63)


class TimeRangeError(OverflowError):
    """A picosecond count left the representable range."""


def _check_ps(value: int) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise TypeError(f"picosecond counts must be int, got {type(value).__name__}")
    if value > MAX_PS or value < MIN_PS:
        raise TimeRangeError(f"{value} ps is outside the simulation time range")
    return value


def div_toward_zero(num: int, den: int) -> int:
    """Integer division rounding toward zero (Python's // floors)."""
    q = abs(num) // abs(den)
    return q if (num >= 0) == (den > 0) else -q


@dataclass(frozen=True, slots=True, order=True)
class SimDuration:
    """Signed span of physical or local time in picoseconds."""

    ps: int

    def __post_init__(self) -> None:
        _check_ps(self.ps)

    @classmethod
    def from_seconds(cls, seconds: float) -> SimDuration:
        return cls(round(seconds * PS_PER_S))

    def seconds(self) -> float:
        return self.ps / PS_PER_S

    def __add__(self, other: SimDuration) -> SimDuration:
        if not isinstance(other, SimDuration):
            return NotImplemented
        return SimDuration(self.ps + other.ps)

    def __sub__(self, other: SimDuration) -> SimDuration:
        if not isinstance(other, SimDuration):
            return NotImplemented
        return SimDuration(self.ps - other.ps)

    def __neg__(self) -> SimDuration:
        return SimDuration(-self.ps)

    def __abs__(self) -> SimDuration:
        return SimDuration(abs(self.ps))

    def __mul__(self, k: int) -> SimDuration:
        if not isinstance(k, int):
            return NotImplemented
        return SimDuration(self.ps * k)

    __rmul__ = __mul__

    def half(self) -> SimDuration:
        """Halve, rounding toward zero (so -3 ps halves to -1 ps)."""
        return SimDuration(div_toward_zero(self.ps, 2))


@dataclass(frozen=True, slots=True, order=True)
class SimTime:
    """Instant on the physical time axis, picoseconds since the simulation epoch."""

    ps: int

    def __post_init__(self) -> None:
        _check_ps(self.ps)

    @classmethod
    def from_seconds(cls, seconds: float) -> SimTime:
        return cls(round(seconds * PS_PER_S))

    def seconds(self) -> float:
        return self.ps / PS_PER_S

    def __add__(self, other: SimDuration) -> SimTime:
        if not isinstance(other, SimDuration):
            return NotImplemented
        return SimTime(self.ps + other.ps)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, SimTime):
            return SimDuration(self.ps - other.ps)
        if isinstance(other, SimDuration):
            return SimTime(self.ps - other.ps)
        return NotImplemented


@dataclass(frozen=True, slots=True)
class Timestamp:
    """Counter value: number of rising edges since the clock's epoch."""

    ticks: int
    period_ps: int

    def __post_init__(self) -> None:
        if self.ticks < 0:
            raise ValueError("timestamp ticks are unsigned")
        if self.period_ps <= 0:
            raise ValueError("period_ps must be positive")


@dataclass(frozen=True, slots=True)
class PhaseFraction:
    """Sub-period remainder of a timestamp, quantized to an instrument step.

    ``period_ps`` is optional; when given, ``ps < period_ps`` is enforced here,
    otherwise it is checked where the fraction is attached to a timestamp.
    """

    ps: int
    resolution_ps: int = 1
    period_ps: int | None = None

    def __post_init__(self) -> None:
        if self.resolution_ps <= 0:
            raise ValueError("resolution_ps must be positive")
        if self.ps < 0:
            raise ValueError("phase fraction must be non-negative")
        if self.ps % self.resolution_ps:
            raise ValueError(f"{self.ps} ps is not a multiple of resolution {self.resolution_ps} ps")
        if self.period_ps is not None and self.ps >= self.period_ps:
            raise ValueError(f"phase {self.ps} ps must be below period {self.period_ps} ps")


def timestamp_to_simtime(ts: Timestamp, phase: PhaseFraction | None = None) -> SimTime:
    """Time value of a timestamp, optionally refined by its phase fraction.

    The result is relative to the clock's own epoch.
    """
    extra = 0
    if phase is not None:
        if phase.ps >= ts.period_ps:
            raise ValueError(f"phase {phase.ps} ps must be below period {ts.period_ps} ps")
        extra = phase.ps
    return SimTime(ts.ticks * ts.period_ps + extra)


def quantize_event(t: SimTime, period_ps: int, epoch: SimTime = SimTime(0)) -> Timestamp:
    """Timestamp of an event: index of the latest rising edge at or before ``t``.

    An event landing exactly on an edge belongs to that edge.
    """
    if period_ps <= 0:
        raise ValueError("period_ps must be positive")
    if t < epoch:
        raise ValueError(f"event at {t.ps} ps precedes clock epoch {epoch.ps} ps")
    return Timestamp((t.ps - epoch.ps) // period_ps, period_ps)


def floor_to(value_ps: int, step_ps: int) -> int:
    """Round down to a multiple of ``step_ps`` (floor, also for negatives)."""
    return (value_ps // step_ps) * step_ps
