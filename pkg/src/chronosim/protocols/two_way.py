"""Two-way time transfer estimators.

Clock B initiates, clock A responds, and offsets follow ``delta = t_B - t_A``
(B's reading minus A's).  All estimators are exact integer arithmetic on the
recorded values; halving rounds toward zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from chronosim.timebase import SimDuration, SimTime


class Variant(str, Enum):
    NTP_STYLE = "NTP_STYLE"
    TWSTT = "TWSTT"
    ROUND_TRIP = "ROUND_TRIP"


@dataclass(frozen=True)
class NtpExchange:
    """Request/response with four timestamps.

    ``correction_fwd``/``correction_bwd`` are transparent-clock residence
    times accumulated on each leg; they default to zero.
    """

    t_b1: SimTime
    t_a2: SimTime
    t_a3: SimTime
    t_b4: SimTime
    correction_fwd: SimDuration = SimDuration(0)
    correction_bwd: SimDuration = SimDuration(0)
    variant: Variant = Variant.NTP_STYLE


@dataclass(frozen=True)
class TwsttExchange:
    """Intervals measured by A and B from their common nominal send instant."""

    tau_a: SimDuration
    tau_b: SimDuration
    variant: Variant = Variant.TWSTT


@dataclass(frozen=True)
class RoundTripExchange:
    """Loop-back interval ``tau`` measured by B, then one timestamp A -> B."""

    tau: SimDuration
    t_a: SimTime
    t_b: SimTime
    variant: Variant = Variant.ROUND_TRIP


ExchangeRecord = NtpExchange | TwsttExchange | RoundTripExchange


@dataclass(frozen=True)
class SyncEstimate:
    delay_d: SimDuration
    offset_delta: SimDuration
    phase_correction: SimDuration | None = None
    asymmetry_correction_applied: SimDuration = SimDuration(0)
    flagged: bool = False
    calibrated: bool = True


def two_way_estimate(rec: NtpExchange) -> SyncEstimate:
    if rec.t_b4 < rec.t_b1 or rec.t_a3 < rec.t_a2:
        raise ValueError("timestamps out of order: need t_b4 >= t_b1 and t_a3 >= t_a2")
    # transparent clocks: remove queuing residence from each leg
    t_a2 = rec.t_a2 - rec.correction_fwd
    t_b4 = rec.t_b4 - rec.correction_bwd
    d = ((t_b4 - rec.t_b1) - (rec.t_a3 - t_a2)).half()
    delta = ((t_b4 - rec.t_a3) + (rec.t_b1 - t_a2)).half()
    return SyncEstimate(d, delta, flagged=d.ps < 0)


def twstt_estimate(rec: TwsttExchange) -> SyncEstimate:
    if rec.tau_a.ps <= 0 or rec.tau_b.ps <= 0:
        raise ValueError("TWSTT intervals must be positive")
    return SyncEstimate((rec.tau_b + rec.tau_a).half(), (rec.tau_b - rec.tau_a).half())


def round_trip_estimate(rec: RoundTripExchange) -> SyncEstimate:
    if rec.tau.ps < 0:
        raise ValueError("round-trip interval must be non-negative")
    d = rec.tau.half()
    return SyncEstimate(d, (rec.t_b - rec.t_a) - d)


def estimate(rec: ExchangeRecord) -> SyncEstimate:
    if isinstance(rec, NtpExchange):
        return two_way_estimate(rec)
    if isinstance(rec, TwsttExchange):
        return twstt_estimate(rec)
    if isinstance(rec, RoundTripExchange):
        return round_trip_estimate(rec)
    raise TypeError(f"not an exchange record: {rec!r}")


def one_way_probe_bounds(send_a: SimTime, recv_b: SimTime, send_b: SimTime, recv_a: SimTime) -> tuple[int, int]:
    """Bracket on ``delta`` from one probe each way, as (lower, upper) in ps.

    With true offset ``delta`` and one-way delays ``d`` (A to B) and ``d2``
    (B to A) this is ``(delta - d2, delta + d)``.  The bracket travels with
    ``delta``; without knowing the delays it confines nothing.
    """
    upper = (recv_b - send_a).ps
    lower = -(recv_a - send_b).ps
    return lower, upper


def collapsed_inequality(d: int, d_prime: int) -> bool:
    """``-d' < 0 < d``: what the probe bracket reduces to once ``delta`` cancels."""
    return -d_prime < 0 < d
