"""How a node turns a physical event into a local timestamp.

Hardware capture latches the counter at the event: the value is floored to
a counter period (or a finer instrument step).  Software capture reads the
clock from the host stack and picks up a uniform latency draw.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Generator, TypeVar

import numpy as np

from chronosim.oscillator import ClockState, ServoState, servo_step
from chronosim.timebase import PS_PER_US, SimDuration, SimTime, floor_to

DEFAULT_SW_JITTER_PS = 100 * PS_PER_US

T = TypeVar("T")

# A protocol procedure yields the physical instants (ps) it must reach before
# continuing; whoever drives it guarantees the yielded times are reached in
# order.  Its return value is the measurement.
Procedure = Generator[int, None, T]


class TimestampMode(str, Enum):
    HW = "hw"
    SW = "sw"


@dataclass
class Endpoint:
    clock: ClockState
    mode: TimestampMode = TimestampMode.HW
    sw_jitter_ps: int = DEFAULT_SW_JITTER_PS
    rng: np.random.Generator | None = None

    def __post_init__(self) -> None:
        if self.rng is None:
            self.rng = np.random.default_rng(2)


def capture(ep: Endpoint, at_ps: int, resolution_ps: int | None = None) -> int:
    """Local timestamp (ps) of an event at physical time ``at_ps``."""
    clock = ep.clock
    clock.advance(SimTime(at_ps))
    raw = clock.read_time().ps
    if ep.mode is TimestampMode.SW:
        return raw + int(ep.rng.integers(0, ep.sw_jitter_ps, endpoint=True))
    return floor_to(raw, resolution_ps or clock.counter_period_ps)


def run_inline(proc: Procedure[T]) -> tuple[T, int | None]:
    """Drive a procedure to completion without an event engine.

    Returns its result and the last instant it yielded.
    """
    last = None
    try:
        while True:
            last = next(proc)
    except StopIteration as stop:
        return stop.value, last


def discipline(
    clock: ClockState,
    servo: ServoState,
    offset: SimDuration,
    interval: SimDuration,
    step_threshold_ps: int = 0,
) -> ServoState:
    """Feed one measured offset to the servo and steer ``clock``.

    Offsets beyond ``step_threshold_ps`` (when non-zero) are removed with a
    counter step instead, and the integrator restarts.
    """
    if step_threshold_ps and abs(offset.ps) > step_threshold_ps:
        clock.step_phase(-offset)
        return ServoState(
            kp=servo.kp, ki=servo.ki, steer_limit=servo.steer_limit,
            lock_threshold_ps=servo.lock_threshold_ps, lock_count=servo.lock_count,
        )
    servo, correction = servo_step(servo, offset, interval)
    clock.steer = correction
    return servo
