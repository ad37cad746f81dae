"""Oscillators, the counters built on them, and the PI servo that steers them.

A clock here is an oscillator driving a counter.  The oscillator's fractional
frequency error is the sum of a fixed bias, linear aging, a temperature term
and a random walk; the counter integrates ``1 + error`` over physical time
into integer picoseconds of local time.
"""

from __future__ import annotations

import bisect
import copy
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np

from chronosim.timebase import PS_PER_S, SimDuration, SimTime, Timestamp, quantize_event

SECONDS_PER_YEAR = 365 * 24 * 3600

# Random-walk frequency is stepped on this fixed grid regardless of how the
# clock is advanced, so the noise path does not depend on the event pattern.
DEFAULT_NOISE_STEP_PS = 10 * 10**9


class ConfigurationError(ValueError):
    """Invalid oscillator or servo configuration."""


@dataclass(frozen=True)
class OscillatorModel:
    nominal_hz: float
    freq_bias: float = 0.0
    aging_per_s: float = 0.0
    temp_coeff: float = 0.0
    white_phase_noise_ps: float = 0.0
    rw_freq_step: float = 0.0
    tunable: bool = False

    def __post_init__(self) -> None:
        if not self.nominal_hz > 0:
            raise ConfigurationError("nominal_hz must be positive")
        if self.white_phase_noise_ps < 0 or self.rw_freq_step < 0:
            raise ConfigurationError("noise parameters must be non-negative")
        if abs(self.freq_bias) >= 1:
            raise ConfigurationError("freq_bias must be a fractional offset below 1")

    @property
    def period_ps(self) -> int:
        return round(PS_PER_S / self.nominal_hz)

    def noiseless(self) -> OscillatorModel:
        return replace(self, white_phase_noise_ps=0.0, rw_freq_step=0.0)


class OscillatorClass(str, Enum):
    """Preset oscillator families; the names appear verbatim in scenario files."""

    XO = "XO"
    OCXO = "OCXO"
    RUBIDIUM = "RUBIDIUM"
    CESIUM_CLASS = "CESIUM_CLASS"
    GNSS_DISCIPLINED = "GNSS_DISCIPLINED"

    def model(self, rng: np.random.Generator | None = None, **overrides) -> OscillatorModel:
        """Parameter set for this class.

        Only the XO bias is random (magnitude 10..50 ppm, random sign); without
        an ``rng`` it is a representative +20 ppm.  ``overrides`` replace any
        field, e.g. ``tunable=True`` for a voltage-controlled XO.
        """
        params = dict(_PRESETS[self])
        if self is OscillatorClass.XO and rng is not None:
            sign = 1.0 if rng.random() < 0.5 else -1.0
            params["freq_bias"] = sign * rng.uniform(10e-6, 50e-6)
        params.update(overrides)
        return OscillatorModel(**params)


# rw_freq_step is per sqrt(second).  For the atomic classes it is chosen so
# that the overlapping Allan deviation at tau = 1000 s equals the class value
# (random-walk FM: adev(tau) = q * sqrt(tau / 3)).
_PRESETS: dict[OscillatorClass, dict] = {
    OscillatorClass.XO: dict(
        nominal_hz=125e6, freq_bias=20e-6, white_phase_noise_ps=10.0, rw_freq_step=1e-10, tunable=False
    ),
    OscillatorClass.OCXO: dict(
        nominal_hz=10e6, freq_bias=1e-8, white_phase_noise_ps=5.0, rw_freq_step=1e-12, tunable=True
    ),
    OscillatorClass.RUBIDIUM: dict(
        nominal_hz=10e6, freq_bias=1e-11, white_phase_noise_ps=1.0,
        rw_freq_step=1e-11 * math.sqrt(3 / 1000), tunable=True,
    ),
    OscillatorClass.CESIUM_CLASS: dict(
        nominal_hz=10e6, freq_bias=1e-13, white_phase_noise_ps=1.0,
        rw_freq_step=1e-13 * math.sqrt(3 / 1000), tunable=False,
    ),
    OscillatorClass.GNSS_DISCIPLINED: dict(
        nominal_hz=10e6, freq_bias=1e-12, white_phase_noise_ps=5.0, rw_freq_step=1e-13, tunable=True
    ),
}


@dataclass(frozen=True)
class TemperatureProfile:
    """Piecewise-linear temperature in kelvin, held constant beyond the end points."""

    points: tuple[tuple[int, float], ...]
    ref_k: float = 298.15

    def __post_init__(self) -> None:
        if not self.points:
            raise ConfigurationError("temperature profile needs at least one point")
        times = [p[0] for p in self.points]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigurationError("temperature profile times must be strictly increasing")

    @classmethod
    def constant(cls, kelvin: float, ref_k: float = 298.15) -> TemperatureProfile:
        return cls(((0, kelvin),), ref_k)

    def at(self, t_ps: int) -> float:
        pts = self.points
        if t_ps <= pts[0][0]:
            return pts[0][1]
        if t_ps >= pts[-1][0]:
            return pts[-1][1]
        i = bisect.bisect_right([p[0] for p in pts], t_ps)
        (t0, k0), (t1, k1) = pts[i - 1], pts[i]
        return k0 + (k1 - k0) * (t_ps - t0) / (t1 - t0)

    def _knots(self, a: int, b: int) -> list[int]:
        return [a] + [t for t, _ in self.points if a < t < b] + [b]

    def deviation_integral(self, a: int, b: int) -> float:
        """Integral of (T - ref) over [a, b], in kelvin * picoseconds.  Exact per piece."""
        knots = self._knots(a, b)
        total = 0.0
        for lo, hi in zip(knots, knots[1:]):
            total += 0.5 * (self.at(lo) + self.at(hi) - 2 * self.ref_k) * (hi - lo)
        return total

    def max_abs_deviation(self, a: int, b: int) -> float:
        return max(abs(self.at(t) - self.ref_k) for t in self._knots(a, b))


@dataclass
class ClockState:
    """Counter driven by one oscillator.

    ``steer`` is the servo's frequency correction and ``syntonization`` the
    frequency-lock term set by SyncE-style syntonization.  Local time is kept
    as an integer picosecond count; each integration segment rounds to the
    nearest picosecond and carries the remainder forward.
    """

    model: OscillatorModel
    epoch_offset: SimDuration = SimDuration(0)
    last_update: SimTime = SimTime(0)
    temperature: TemperatureProfile | None = None
    counter_period_ps: int | None = None
    noise_step_ps: int = DEFAULT_NOISE_STEP_PS
    rng: np.random.Generator | None = None
    jitter_rng: np.random.Generator | None = None
    steer: float = 0.0
    syntonization: float = 0.0
    rw_freq: float = 0.0
    _elapsed_ps: int = field(default=0, init=False, repr=False)
    _carry: float = field(default=0.0, init=False, repr=False)
    _jitter_ps: int = field(default=0, init=False, repr=False)
    _start_ps: int = field(default=0, init=False, repr=False)
    _next_noise_ps: int = field(default=0, init=False, repr=False)
    _read_floor: int = field(default=0, init=False, repr=False)

    def __post_init__(self) -> None:
        if self.counter_period_ps is None:
            self.counter_period_ps = self.model.period_ps
        if self.counter_period_ps <= 0:
            raise ConfigurationError("counter period must be positive")
        if self.noise_step_ps <= 0:
            raise ConfigurationError("noise_step_ps must be positive")
        if self.rng is None:
            self.rng = np.random.default_rng(0)
        if self.jitter_rng is None:
            self.jitter_rng = np.random.default_rng(1)
        self._start_ps = self.last_update.ps
        self._next_noise_ps = self._start_ps + self.noise_step_ps
        self._read_floor = self.read_time().ps

    # -- frequency -------------------------------------------------------

    def oscillator_frac_freq(self, at_ps: int | None = None) -> float:
        """Free-running fractional frequency error, without steering terms."""
        t = self.last_update.ps if at_ps is None else at_ps
        m = self.model
        f = m.freq_bias + self.rw_freq + m.aging_per_s * (t - self._start_ps) / PS_PER_S
        if self.temperature is not None and m.temp_coeff:
            f += m.temp_coeff * (self.temperature.at(t) - self.temperature.ref_k)
        return f

    @property
    def current_frac_freq(self) -> float:
        return self.oscillator_frac_freq() + self.syntonization + self.steer

    @property
    def tick_count(self) -> int:
        return self.read_time().ps // self.counter_period_ps

    # -- integration -----------------------------------------------------

    def _integrate(self, a: int, b: int, temperature: TemperatureProfile | None) -> None:
        m = self.model
        dt = b - a
        extra = (m.freq_bias + self.rw_freq + self.syntonization + self.steer) * dt
        if m.aging_per_s:
            extra += m.aging_per_s * (dt * ((a - self._start_ps) + (b - self._start_ps))) / (2 * PS_PER_S)
        if temperature is not None and m.temp_coeff:
            extra += m.temp_coeff * temperature.deviation_integral(a, b)
        self._carry += extra
        inc = round(self._carry)
        self._carry -= inc
        self._elapsed_ps += dt + inc

    def advance(self, to: SimTime, environment: TemperatureProfile | None = None) -> ClockState:
        if to < self.last_update:
            raise ValueError(f"cannot advance clock backwards ({to.ps} < {self.last_update.ps})")
        temperature = environment if environment is not None else self.temperature
        cur, end = self.last_update.ps, to.ps
        if cur == end:
            return self
        m = self.model
        if not m.rw_freq_step:
            # nothing to draw on the noise grid: one analytic segment
            self._integrate(cur, end, temperature)
            if end >= self._next_noise_ps:
                missed = (end - self._next_noise_ps) // self.noise_step_ps + 1
                self._next_noise_ps += missed * self.noise_step_ps
            cur = end
        while cur < end:
            seg_end = min(end, self._next_noise_ps)
            self._integrate(cur, seg_end, temperature)
            cur = seg_end
            if cur == self._next_noise_ps:
                if m.rw_freq_step:
                    sigma = m.rw_freq_step * math.sqrt(self.noise_step_ps / PS_PER_S)
                    self.rw_freq += sigma * self.rng.standard_normal()
                self._next_noise_ps += self.noise_step_ps
        if m.white_phase_noise_ps:
            prev_read = self._read_floor
            jitter = round(m.white_phase_noise_ps * self.jitter_rng.standard_normal())
            # an edge is never observed before one already seen: keep readings monotone
            self._jitter_ps = max(jitter, prev_read - self.epoch_offset.ps - self._elapsed_ps)
        self._read_floor = self.read_time().ps
        self.last_update = to
        return self

    # -- reading ---------------------------------------------------------

    def local_time(self) -> SimTime:
        """Counter time at ``last_update`` without edge jitter (simulation truth)."""
        return SimTime(self.epoch_offset.ps + self._elapsed_ps)

    def read_time(self) -> SimTime:
        """Counter time as observed on the emitted edges, white phase noise included."""
        return SimTime(self.epoch_offset.ps + self._elapsed_ps + self._jitter_ps)

    def physical_period_ps(self) -> float:
        return self.counter_period_ps / (1.0 + self.current_frac_freq)

    def step_phase(self, delta: SimDuration) -> None:
        """Jump the counter by ``delta`` (a time step rather than a slew)."""
        self._elapsed_ps += delta.ps
        self._read_floor = self.read_time().ps

    def copy(self) -> ClockState:
        return copy.deepcopy(self)


def advance(clock: ClockState, to: SimTime, environment: TemperatureProfile | None = None) -> ClockState:
    return clock.advance(to, environment)


def read_local(clock: ClockState, at: SimTime) -> Timestamp:
    if at != clock.last_update:
        raise ValueError("read_local must follow advance to the same instant")
    return quantize_event(clock.read_time(), clock.counter_period_ps)


def offset_between(a: ClockState, b: ClockState) -> SimDuration:
    """True offset b - a of two clocks advanced to the same instant."""
    if a.last_update != b.last_update:
        raise ValueError("clocks must be advanced to the same instant")
    return b.local_time() - a.local_time()


# -- servo ---------------------------------------------------------------


@dataclass(frozen=True)
class ServoState:
    """PI servo state.  ``integral_acc`` is the running sum of measured offsets in ps."""

    kp: float = 0.7
    ki: float = 0.3
    steer_limit: float = 1e-4
    integral_acc: float = 0.0
    lock_threshold_ps: int = 1000
    lock_count: int = 5
    locked: bool = False
    streak: int = 0

    def __post_init__(self) -> None:
        if not 0 < self.steer_limit < 1:
            raise ConfigurationError("steer_limit must lie in (0, 1) to keep local time increasing")
        if self.kp < 0 or self.ki < 0:
            raise ConfigurationError("servo gains must be non-negative")


def attach_servo(model: OscillatorModel, servo: ServoState | None = None) -> ServoState:
    if not model.tunable:
        raise ConfigurationError("oscillator has no tuning port (tunable=false); cannot attach a servo")
    return servo if servo is not None else ServoState()


def servo_step(servo: ServoState, measured_offset: SimDuration, interval: SimDuration) -> tuple[ServoState, float]:
    """One PI update.  Returns the new state and the fractional frequency correction.

    The correction is absolute (it replaces the previous one).  A positive
    offset (clock ahead) yields a negative correction.  While the output is
    clamped the integrator is frozen.
    """
    if interval.ps <= 0:
        raise ValueError("servo interval must be positive")
    offset = measured_offset.ps
    acc = servo.integral_acc + offset
    correction = -(servo.kp * offset + servo.ki * acc) / interval.ps
    if abs(correction) > servo.steer_limit:
        correction = math.copysign(servo.steer_limit, correction)
        acc = servo.integral_acc
    streak = servo.streak + 1 if abs(offset) < servo.lock_threshold_ps else 0
    new = replace(servo, integral_acc=acc, streak=streak, locked=streak >= servo.lock_count)
    return new, correction


# -- holdover ------------------------------------------------------------


def holdover_bound_s(
    residual_freq_bias: float,
    duration_s: float,
    aging_per_s: float = 0.0,
    temp_coeff: float = 0.0,
    temp_deviation_k: float = 0.0,
) -> float:
    """Worst-case free-running time error in seconds after ``duration_s``."""
    return (
        abs(residual_freq_bias) * duration_s
        + 0.5 * abs(aging_per_s) * duration_s**2
        + abs(temp_coeff) * abs(temp_deviation_k) * duration_s
    )


def holdover_time_to(bound_s: float, residual_freq_bias: float, aging_per_s: float = 0.0) -> float:
    """Seconds of holdover until the worst-case error reaches ``bound_s``."""
    b, a = abs(residual_freq_bias), 0.5 * abs(aging_per_s)
    if a == 0:
        if b == 0:
            return math.inf
        return bound_s / b
    return (-b + math.sqrt(b * b + 4 * a * bound_s)) / (2 * a)


def holdover(
    clock: ClockState,
    loss_at: SimTime,
    duration: SimDuration,
    environment: TemperatureProfile | None = None,
) -> SimDuration:
    """Closed-form worst-case drift after losing the reference at ``loss_at``.

    The residual bias is the clock's fractional frequency at the moment of
    loss, servo correction included.
    """
    if clock.last_update != loss_at:
        raise ValueError("clock must be advanced to loss_at")
    temperature = environment if environment is not None else clock.temperature
    dev = 0.0
    if temperature is not None:
        dev = temperature.max_abs_deviation(loss_at.ps, loss_at.ps + duration.ps)
    bound = holdover_bound_s(
        clock.current_frac_freq, duration.seconds(), clock.model.aging_per_s, clock.model.temp_coeff, dev
    )
    return SimDuration(round(bound * PS_PER_S))


def preset_names() -> Sequence[str]:
    return [c.value for c in OscillatorClass]
