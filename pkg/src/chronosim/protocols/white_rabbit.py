"""White Rabbit style link: syntonization, hardware timestamps, fine phase, calibration.

One exchange runs in four stages:

1. syntonize: the slave's oscillator frequency-locks to the master's carrier;
2. coarse: request/response with hardware timestamps at the counter period;
3. fine: each timestamp is completed with the sub-period phase between the
   local counter edges and the carrier the event rides on;
4. correct: the calibrated fiber asymmetry is removed from the offset.

Phase measurement only makes sense between syntonized edge streams, which
is why syntonization comes first.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from fractions import Fraction

from chronosim.channel import Direction, FiberLink
from chronosim.oscillator import ClockState, ConfigurationError, ServoState
from chronosim.protocols.capture import Procedure, discipline, run_inline
from chronosim.protocols.two_way import NtpExchange, SyncEstimate, two_way_estimate
from chronosim.timebase import PS_PER_US, PhaseFraction, SimDuration, SimTime, floor_to

log = logging.getLogger(__name__)


class SyntonizationError(ValueError):
    """Edge streams are not frequency-locked closely enough to compare phase."""


@dataclass(frozen=True)
class EdgeStream:
    """Periodic rising edges: one edge instant and the period, in physical ps.

    ``nominal_period_ps`` is the period in the receiving counter's own units.
    """

    edge_ps: float
    period_ps: float
    nominal_period_ps: int


@dataclass(frozen=True)
class WrConfig:
    phase_resolution_ps: int = 10
    turnaround_ps: int = 10 * PS_PER_US
    syntonization_tolerance: float = 5e-6
    step_threshold_ps: int = PS_PER_US
    calibration_exchanges: int = 100
    calibration_spacing_ps: int = 1_000_003


def clock_edges(clock: ClockState) -> EdgeStream:
    """Counter edge stream of ``clock`` around its ``last_update``."""
    period = clock.counter_period_ps
    frac_local = clock.read_time().ps % period
    phys = clock.physical_period_ps()
    return EdgeStream(clock.last_update.ps - frac_local * phys / period, phys, period)


def carrier(clock: ClockState, edge_ps: int) -> EdgeStream:
    """``clock``'s carrier with an edge at physical ``edge_ps`` (e.g. a frame arrival)."""
    return EdgeStream(float(edge_ps), clock.physical_period_ps(), clock.counter_period_ps)


def phase_measure(
    signal_a: EdgeStream, signal_b: EdgeStream, resolution_ps: int, tolerance: float = 5e-6
) -> PhaseFraction:
    """Delay from the latest ``signal_a`` edge to the next ``signal_b`` edge.

    Expressed in ``signal_a``'s counter units and floored to ``resolution_ps``.
    """
    if signal_a.nominal_period_ps != signal_b.nominal_period_ps:
        raise SyntonizationError("edge streams have different nominal frequencies")
    mismatch = abs(signal_a.period_ps - signal_b.period_ps) / signal_a.period_ps
    if mismatch > tolerance:
        raise SyntonizationError(f"fractional frequency mismatch {mismatch:.3g} exceeds {tolerance:.3g}")
    nominal = signal_a.nominal_period_ps
    shift = (signal_b.edge_ps - signal_a.edge_ps) % signal_a.period_ps
    local = round(shift * nominal / signal_a.period_ps, 6)
    ps = min(floor_to(math.floor(local), resolution_ps), floor_to(nominal - 1, resolution_ps))
    return PhaseFraction(ps, resolution_ps, nominal)


def syntonize(master: ClockState, slave: ClockState) -> None:
    """Lock the slave oscillator's frequency to the master's (SyncE).

    The slave's servo steering stays on top of the locked frequency.
    """
    if master.last_update != slave.last_update:
        raise ValueError("clocks must be advanced to the same instant")
    if not slave.model.tunable:
        raise ConfigurationError("slave oscillator is not tunable; it cannot be syntonized")
    if master.counter_period_ps != slave.counter_period_ps:
        raise SyntonizationError("master and slave counters run at different nominal rates")
    slave.syntonization = master.current_frac_freq - slave.oscillator_frac_freq()


def _fine_capture(clock: ClockState, at_ps: int, stream: EdgeStream, cfg: WrConfig) -> tuple[int, int]:
    clock.advance(SimTime(at_ps))
    coarse = floor_to(clock.read_time().ps, clock.counter_period_ps)
    phase = phase_measure(clock_edges(clock), stream, cfg.phase_resolution_ps, cfg.syntonization_tolerance)
    return coarse + phase.ps, phase.ps


def wr_exchange(
    master: ClockState, slave: ClockState, link: FiberLink, cfg: WrConfig, start_ps: int
) -> Procedure[SyncEstimate]:
    master.advance(SimTime(start_ps))
    slave.advance(SimTime(start_ps))
    syntonize(master, slave)

    t = start_ps
    t_b1, ph_b1 = _fine_capture(slave, t, carrier(slave, t), cfg)
    request = carrier(slave, t)
    t += link.delay(Direction.FORWARD).ps
    yield t
    t_a2, ph_a2 = _fine_capture(master, t, replace(request, edge_ps=float(t)), cfg)
    t += cfg.turnaround_ps
    yield t
    t_a3, ph_a3 = _fine_capture(master, t, carrier(master, t), cfg)
    response = carrier(master, t)
    t += link.delay(Direction.BACKWARD).ps
    yield t
    t_b4, ph_b4 = _fine_capture(slave, t, replace(response, edge_ps=float(t)), cfg)

    coarse = two_way_estimate(NtpExchange(SimTime(t_b1), SimTime(t_a2), SimTime(t_a3), SimTime(t_b4)))
    phase_part = SimDuration((ph_b4 - ph_a3) + (ph_b1 - ph_a2)).half()
    if link.calibrated_asymmetry is None:
        log.debug("uncalibrated fiber: offset carries half the link asymmetry")
        return replace(coarse, phase_correction=phase_part, calibrated=False)
    # delta_est = delta - asym/2 with asym = fwd - bwd
    corr = link.calibrated_asymmetry.half()
    return replace(
        coarse,
        offset_delta=coarse.offset_delta + corr,
        phase_correction=phase_part,
        asymmetry_correction_applied=corr,
    )


def white_rabbit_sync(
    master: ClockState,
    slave: ClockState,
    link: FiberLink,
    config: WrConfig = WrConfig(),
    at: SimTime | None = None,
    servo: ServoState | None = None,
    interval: SimDuration | None = None,
) -> tuple[SyncEstimate, ServoState | None]:
    """Run one exchange immediately and, given a servo, steer the slave."""
    start = at.ps if at is not None else max(master.last_update.ps, slave.last_update.ps)
    est, _ = run_inline(wr_exchange(master, slave, link, config, start))
    if servo is not None:
        servo = discipline(slave, servo, est.offset_delta, interval or SimDuration(10**12), config.step_threshold_ps)
    return est, servo


def calibrate_link(
    master: ClockState,
    slave: ClockState,
    link: FiberLink,
    known_reference: SimDuration,
    config: WrConfig = WrConfig(),
) -> FiberLink:
    """Measure the link's asymmetry against a known true offset (slave - master).

    Works on copies of both clocks; the originals are untouched.  The copies
    are syntonized with the servo term cleared, so the true offset holds at
    ``known_reference`` through the calibration burst.
    """
    m, s = master.copy(), slave.copy()
    s.steer = 0.0
    bare = replace(link, calibrated_asymmetry=None)
    t = max(m.last_update.ps, s.last_update.ps)
    total = 0
    for _ in range(config.calibration_exchanges):
        est, last = run_inline(wr_exchange(m, s, bare, config, t))
        total += est.offset_delta.ps - known_reference.ps
        t = last + config.calibration_spacing_ps
    # bias = -asym/2
    asym = round(Fraction(-2 * total, config.calibration_exchanges))
    return replace(link, calibrated_asymmetry=SimDuration(asym))
