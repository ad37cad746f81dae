"""Event-level procedures for the packet and one-way protocols.

Each procedure is a generator: it yields the physical instants (ps) at which
something happens, captures timestamps once the instant is reached and
returns a :class:`SyncEstimate` (``None`` when a message was dropped).
B is always the slave endpoint and A the master.
"""

from __future__ import annotations

import math

import numpy as np

from chronosim.channel import CableModel, Direction, PathModel, cable_delay, sample_delay_parts
from chronosim.protocols.capture import Endpoint, Procedure, capture
from chronosim.protocols.gnss import (
    SatelliteObservation,
    compensate_cable,
    gnss_solve,
    synthetic_constellation,
    travel_time_ps,
)
from chronosim.protocols.two_way import (
    NtpExchange,
    RoundTripExchange,
    SyncEstimate,
    TwsttExchange,
    round_trip_estimate,
    two_way_estimate,
    twstt_estimate,
)
from chronosim.timebase import PS_PER_MS, PS_PER_US, SimDuration, SimTime, floor_to


def _dropped(path: PathModel, rng: np.random.Generator, messages: int) -> bool:
    # always consume the same number of draws so drops do not shift later noise
    draws = rng.random(messages)
    return bool(path.drop_prob) and bool((draws < path.drop_prob).any())


def two_way_exchange(
    slave: Endpoint,
    master: Endpoint,
    path: PathModel,
    rng: np.random.Generator,
    start_ps: int,
    turnaround_ps: int = 10 * PS_PER_US,
    tc_resolution_ps: int | None = None,
) -> Procedure[SyncEstimate | None]:
    """Request/response with four timestamps (NTP style, or PTP with hardware stamps).

    With ``tc_resolution_ps`` set, transparent clocks along the path report
    each leg's queuing residence, measured on a grid of that resolution.
    """
    base_f, queue_f = sample_delay_parts(path, Direction.FORWARD, rng)
    base_b, queue_b = sample_delay_parts(path, Direction.BACKWARD, rng)
    dropped = _dropped(path, rng, 2)

    t = start_ps
    t_b1 = capture(slave, t)
    if dropped:
        return None
    t += base_f + queue_f
    yield t
    t_a2 = capture(master, t)
    t += turnaround_ps
    yield t
    t_a3 = capture(master, t)
    t += base_b + queue_b
    yield t
    t_b4 = capture(slave, t)

    corr_f = corr_b = 0
    if tc_resolution_ps:
        corr_f = floor_to(queue_f, tc_resolution_ps)
        corr_b = floor_to(queue_b, tc_resolution_ps)
    rec = NtpExchange(
        SimTime(t_b1), SimTime(t_a2), SimTime(t_a3), SimTime(t_b4), SimDuration(corr_f), SimDuration(corr_b)
    )
    if rec.t_b4 < rec.t_b1 or rec.t_a3 < rec.t_a2:
        # software jitter reordered a host's own stamps; discard like a sanity-check failure
        return None
    return two_way_estimate(rec)


def _physical_when(ep: Endpoint, start_ps: int, local_target: int) -> int:
    clock = ep.clock
    gap = local_target - clock.local_time().ps
    return start_ps + max(0, math.ceil(gap / (1.0 + clock.current_frac_freq)))


def twstt_exchange(
    slave: Endpoint,
    master: Endpoint,
    path: PathModel,
    rng: np.random.Generator,
    start_ps: int,
    lead_ps: int = PS_PER_MS,
    tic_resolution_ps: int = 1,
) -> Procedure[SyncEstimate | None]:
    """Both sides transmit when their own clock reads the same value.

    The common value is the master's reading at ``start_ps`` plus
    ``lead_ps``, so the slave's offset must stay below ``lead_ps``.  Each side
    measures, with its interval counter, the time from its own transmission
    instant to the arrival of the other's signal; the intervals are then
    exchanged over the packet path.
    """
    master.clock.advance(SimTime(start_ps))
    slave.clock.advance(SimTime(start_ps))
    nominal = master.clock.local_time().ps + lead_ps
    send_a = _physical_when(master, start_ps, nominal)
    send_b = _physical_when(slave, start_ps, nominal)
    arrive_b = send_a + sum(sample_delay_parts(path, Direction.BACKWARD, rng))
    arrive_a = send_b + sum(sample_delay_parts(path, Direction.FORWARD, rng))
    report = sum(sample_delay_parts(path, Direction.BACKWARD, rng))
    dropped = _dropped(path, rng, 3)

    tau = {}
    for at, who in sorted([(arrive_a, "a"), (arrive_b, "b")]):
        yield at
        ep = master if who == "a" else slave
        tau[who] = capture(ep, at, tic_resolution_ps) - nominal
    yield max(arrive_a, arrive_b) + report
    if dropped or tau["a"] <= 0 or tau["b"] <= 0:
        return None
    return twstt_estimate(TwsttExchange(SimDuration(tau["a"]), SimDuration(tau["b"])))


def round_trip_exchange(
    slave: Endpoint,
    master: Endpoint,
    path: PathModel,
    rng: np.random.Generator,
    start_ps: int,
    reflect_delay_ps: int = 0,
    tic_resolution_ps: int = 1,
) -> Procedure[SyncEstimate | None]:
    """Loop-back delay measurement followed by one timestamp from A to B.

    ``reflect_delay_ps`` is processing time at the reflector, which the
    estimator does not know about.
    """
    fwd = sum(sample_delay_parts(path, Direction.FORWARD, rng))
    back = sum(sample_delay_parts(path, Direction.BACKWARD, rng))
    back2 = sum(sample_delay_parts(path, Direction.BACKWARD, rng))
    dropped = _dropped(path, rng, 3)

    t = start_ps
    t0 = capture(slave, t, tic_resolution_ps)
    t += fwd + reflect_delay_ps + back
    yield t
    tau = capture(slave, t, tic_resolution_ps) - t0
    if dropped:
        return None
    t_a = capture(master, t, tic_resolution_ps)
    t += back2
    yield t
    t_b = capture(slave, t, tic_resolution_ps)
    return round_trip_estimate(RoundTripExchange(SimDuration(tau), SimTime(t_a), SimTime(t_b)))


def gnss_epoch(
    receiver: Endpoint,
    sky: Endpoint,
    receiver_position: np.ndarray,
    rng: np.random.Generator,
    start_ps: int,
    n_satellites: int = 6,
    noise_ps: float = 0.0,
    cable: CableModel | None = None,
    compensate: bool = True,
    tic_resolution_ps: int = 1,
) -> Procedure[SyncEstimate | None]:
    """Every satellite transmits at the sky clock's reading at ``start_ps``.

    The sky endpoint's clock is GNSS time.  Signals cross the antenna cable
    after the free-space leg; the receiver timestamps each arrival.
    """
    sky.clock.advance(SimTime(start_ps))
    t_send = sky.clock.local_time().ps
    sats = synthetic_constellation(receiver_position, n_satellites, rng)
    noise = rng.standard_normal(n_satellites) * noise_ps
    extra = cable_delay(cable).ps if cable is not None else 0
    arrivals = sorted((start_ps + travel_time_ps(receiver_position, s) + extra, i) for i, s in enumerate(sats))

    obs = []
    for at, i in arrivals:
        yield at
        tau = capture(receiver, at, tic_resolution_ps) - t_send + round(noise[i])
        obs.append(SatelliteObservation(tuple(float(c) for c in sats[i]), SimTime(t_send), SimDuration(tau)))
    solution = gnss_solve(obs)
    if compensate and cable is not None:
        solution = compensate_cable(solution, cable)
    mean_tau = SimDuration(round(sum(o.measured_delay.ps for o in obs) / len(obs)))
    return SyncEstimate(mean_tau, solution.clock_offset, flagged=not solution.converged)
