"""One-way GNSS time transfer: pseudorange solve for position and clock offset.

For satellite ``i`` at ``s_i`` the receiver measures the signal travel time
``tau_i`` with its own clock, which is offset by ``Delta`` from GNSS time:

    (tau_i - Delta) * c = |s_i - p|

Unknowns are the receiver position ``p`` and ``Delta``.  Satellites here are
synthetic point emitters; there is no orbit model.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from chronosim.channel import SPEED_OF_LIGHT, CableModel, cable_delay
from chronosim.timebase import PS_PER_S, SimDuration, SimTime

EARTH_RADIUS_M = 6_371_000.0
GNSS_ORBIT_RADIUS_M = EARTH_RADIUS_M + 20_200_000.0

MAX_ITERATIONS = 50
POSITION_TOL_M = 1e-4
OFFSET_TOL_S = 1e-13
# geometry mask for synthetic skies
DEFAULT_MAX_PDOP = 3.0


class GnssGeometryError(ValueError):
    """Satellite geometry leaves the normal equations singular."""


@dataclass(frozen=True)
class SatelliteObservation:
    position: tuple[float, float, float]
    send_time: SimTime
    measured_delay: SimDuration

    def __post_init__(self) -> None:
        if self.measured_delay.ps <= 0:
            raise ValueError("measured delay must be positive")


@dataclass(frozen=True)
class GnssSolution:
    position: tuple[float, float, float]
    clock_offset: SimDuration
    iterations: int
    residual_norm: float
    converged: bool = True
    clock_offset_s: float = 0.0


def _arrays(observations: Sequence[SatelliteObservation]) -> tuple[np.ndarray, np.ndarray]:
    sats = np.array([o.position for o in observations], dtype=float)
    tau = np.array([o.measured_delay.ps for o in observations], dtype=float) / PS_PER_S
    return sats, tau


def gnss_residuals(params: np.ndarray, sats: np.ndarray, tau_s: np.ndarray) -> np.ndarray:
    """r_i = (tau_i - Delta) * c - |s_i - p| for params (x, y, z, Delta[s])."""
    dist = np.linalg.norm(sats - params[:3], axis=1)
    return (tau_s - params[3]) * SPEED_OF_LIGHT - dist


def gnss_jacobian(params: np.ndarray, sats: np.ndarray) -> np.ndarray:
    """d r_i / d (x, y, z, Delta[s])."""
    diff = sats - params[:3]
    dist = np.linalg.norm(diff, axis=1)
    jac = np.empty((len(sats), 4))
    jac[:, :3] = diff / dist[:, None]
    jac[:, 3] = -SPEED_OF_LIGHT
    return jac


def gnss_solve(
    observations: Sequence[SatelliteObservation],
    initial_guess: tuple[float, float, float, float] | None = None,
) -> GnssSolution:
    """Gauss-Newton least squares on the pseudorange residuals.

    Runs in metres internally (the clock unknown is scaled by c) so the
    normal matrix is well conditioned.  ``initial_guess`` is
    ``(x, y, z, Delta_seconds)`` and defaults to the Earth's centre with a
    zero offset.
    """
    if len(observations) < 4:
        raise ValueError("need at least four satellites")
    sats, tau = _arrays(observations)
    rho = tau * SPEED_OF_LIGHT
    x = np.zeros(4)
    if initial_guess is not None:
        x[:3] = initial_guess[:3]
        x[3] = initial_guess[3] * SPEED_OF_LIGHT

    converged = False
    it = 0
    for it in range(1, MAX_ITERATIONS + 1):
        diff = sats - x[:3]
        dist = np.linalg.norm(diff, axis=1)
        r = rho - x[3] - dist
        # jacobian with the clock column in metres
        h = np.empty((len(sats), 4))
        h[:, :3] = diff / dist[:, None]
        h[:, 3] = -1.0
        normal = h.T @ h
        if np.linalg.cond(normal) > 1e12:
            raise GnssGeometryError("singular satellite geometry")
        step = np.linalg.solve(normal, -h.T @ r)
        x += step
        if np.linalg.norm(step[:3]) < POSITION_TOL_M and abs(step[3]) / SPEED_OF_LIGHT < OFFSET_TOL_S:
            converged = True
            break

    offset_s = x[3] / SPEED_OF_LIGHT
    params = np.array([x[0], x[1], x[2], offset_s])
    residual = float(np.linalg.norm(gnss_residuals(params, sats, tau)))
    return GnssSolution(
        position=(float(x[0]), float(x[1]), float(x[2])),
        clock_offset=SimDuration(round(offset_s * PS_PER_S)),
        iterations=it,
        residual_norm=residual,
        converged=converged,
        clock_offset_s=offset_s,
    )


def compensate_cable(solution: GnssSolution, cable: CableModel) -> GnssSolution:
    """Remove the antenna-cable delay from the solved clock offset.

    Not idempotent: applying it twice over-corrects by one cable delay.
    """
    delay = cable_delay(cable)
    return replace(
        solution,
        clock_offset=solution.clock_offset - delay,
        clock_offset_s=solution.clock_offset_s - delay.ps / PS_PER_S,
    )


# -- synthetic sky -------------------------------------------------------


def random_receiver(rng: np.random.Generator, radius: float = EARTH_RADIUS_M) -> np.ndarray:
    v = rng.standard_normal(3)
    return radius * v / np.linalg.norm(v)


def pdop(receiver: np.ndarray, sats: np.ndarray) -> float:
    """Position dilution of precision of a satellite set seen from ``receiver``."""
    los = sats - receiver
    h = np.hstack([-los / np.linalg.norm(los, axis=1)[:, None], np.ones((len(sats), 1))])
    q = np.linalg.inv(h.T @ h)
    return float(np.sqrt(np.trace(q[:3, :3])))


def synthetic_constellation(
    receiver: np.ndarray,
    n: int,
    rng: np.random.Generator,
    radius: float = GNSS_ORBIT_RADIUS_M,
    min_elevation_deg: float = 10.0,
    max_pdop: float | None = DEFAULT_MAX_PDOP,
) -> np.ndarray:
    """``n`` satellites on a sphere, all above ``min_elevation_deg`` for the receiver.

    Whole sets are redrawn until their PDOP is at most ``max_pdop``, as a
    receiver would pick a well-spread subset of the visible sky.
    """
    up = receiver / np.linalg.norm(receiver)
    min_sin = np.sin(np.radians(min_elevation_deg))
    while True:
        out = []
        while len(out) < n:
            v = rng.standard_normal(3)
            s = radius * v / np.linalg.norm(v)
            los = s - receiver
            if los @ up / np.linalg.norm(los) >= min_sin:
                out.append(s)
        sats = np.array(out)
        if max_pdop is None or n < 4 or pdop(receiver, sats) <= max_pdop:
            return sats


def travel_time_ps(receiver: np.ndarray, sat: np.ndarray) -> int:
    return round(float(np.linalg.norm(sat - receiver)) / SPEED_OF_LIGHT * PS_PER_S)


def synthetic_observations(
    receiver: np.ndarray,
    clock_offset: SimDuration,
    sats: np.ndarray,
    send_time: SimTime = SimTime(0),
    noise_ps: float = 0.0,
    rng: np.random.Generator | None = None,
    cable: CableModel | None = None,
) -> list[SatelliteObservation]:
    """Forward model: what a receiver with the given offset would measure."""
    extra = cable_delay(cable).ps if cable is not None else 0
    obs = []
    for s in sats:
        tau = travel_time_ps(receiver, s) + clock_offset.ps + extra
        if noise_ps:
            tau += round(noise_ps * rng.standard_normal())
        obs.append(SatelliteObservation(tuple(float(c) for c in s), send_time, SimDuration(tau)))
    return obs
