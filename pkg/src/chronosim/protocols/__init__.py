"""Synchronization methods: two-way variants, GNSS one-way solve and White Rabbit."""

from enum import Enum

from chronosim.protocols.capture import Endpoint, TimestampMode, capture, discipline, run_inline
from chronosim.protocols.gnss import (
    GnssGeometryError,
    GnssSolution,
    SatelliteObservation,
    compensate_cable,
    gnss_jacobian,
    gnss_residuals,
    gnss_solve,
    pdop,
    random_receiver,
    synthetic_constellation,
    synthetic_observations,
)
from chronosim.protocols.exchanges import gnss_epoch, round_trip_exchange, two_way_exchange, twstt_exchange
from chronosim.protocols.two_way import (
    NtpExchange,
    RoundTripExchange,
    SyncEstimate,
    TwsttExchange,
    Variant,
    collapsed_inequality,
    estimate,
    one_way_probe_bounds,
    round_trip_estimate,
    two_way_estimate,
    twstt_estimate,
)
from chronosim.protocols.white_rabbit import (
    EdgeStream,
    SyntonizationError,
    WrConfig,
    calibrate_link,
    phase_measure,
    syntonize,
    white_rabbit_sync,
)


class Protocol(str, Enum):
    """Protocol names accepted in scenario files."""

    NTP_STYLE = "NTP_STYLE"
    PTP_HW = "PTP_HW"
    TWSTT = "TWSTT"
    ROUND_TRIP = "ROUND_TRIP"
    WHITE_RABBIT = "WHITE_RABBIT"
    GNSS = "GNSS"


__all__ = [
    "EdgeStream",
    "Endpoint",
    "GnssGeometryError",
    "GnssSolution",
    "NtpExchange",
    "Protocol",
    "RoundTripExchange",
    "SatelliteObservation",
    "SyncEstimate",
    "SyntonizationError",
    "TimestampMode",
    "TwsttExchange",
    "Variant",
    "WrConfig",
    "calibrate_link",
    "capture",
    "collapsed_inequality",
    "compensate_cable",
    "discipline",
    "estimate",
    "gnss_epoch",
    "gnss_jacobian",
    "gnss_residuals",
    "gnss_solve",
    "one_way_probe_bounds",
    "pdop",
    "phase_measure",
    "random_receiver",
    "round_trip_estimate",
    "round_trip_exchange",
    "run_inline",
    "synthetic_constellation",
    "synthetic_observations",
    "syntonize",
    "two_way_estimate",
    "two_way_exchange",
    "twstt_estimate",
    "twstt_exchange",
    "white_rabbit_sync",
]
