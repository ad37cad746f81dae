"""Transmission media: packet paths, single-strand fiber and antenna cable.

Direction convention used throughout the package: *forward* is the request
leg, from the initiating clock B (the slave) to the responding clock A (the
master); *backward* is A to B.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from chronosim.oscillator import ConfigurationError
from chronosim.timebase import PS_PER_S, SimDuration

SPEED_OF_LIGHT = 299_792_458.0  # m/s


class Direction(str, Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


@dataclass(frozen=True)
class Jitter:
    """Per-traversal delay excess.

    ``kind`` is ``none``, ``uniform`` (``lo_ps``..``hi_ps``) or ``exponential``
    (``min_ps`` plus an exponential draw with mean ``mean_excess_ps``).
    Every draw is non-negative, so no sample undercuts the base delay.
    """

    kind: str = "none"
    lo_ps: int = 0
    hi_ps: int = 0
    min_ps: int = 0
    mean_excess_ps: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("none", "uniform", "exponential"):
            raise ValueError(f"unknown jitter kind {self.kind!r}")
        if self.kind == "uniform" and not 0 <= self.lo_ps <= self.hi_ps:
            raise ValueError("uniform jitter needs 0 <= lo_ps <= hi_ps")
        if self.kind == "exponential" and (self.min_ps < 0 or self.mean_excess_ps < 0):
            raise ValueError("exponential jitter needs min_ps >= 0 and mean_excess_ps >= 0")

    @property
    def mean_ps(self) -> float:
        if self.kind == "uniform":
            return 0.5 * (self.lo_ps + self.hi_ps)
        if self.kind == "exponential":
            return self.min_ps + self.mean_excess_ps
        return 0.0

    def sample(self, rng: np.random.Generator) -> int:
        if self.kind == "uniform":
            return int(rng.integers(self.lo_ps, self.hi_ps, endpoint=True))
        if self.kind == "exponential":
            return self.min_ps + round(rng.exponential(self.mean_excess_ps)) if self.mean_excess_ps else self.min_ps
        return 0


NO_JITTER = Jitter()


@dataclass(frozen=True)
class PathModel:
    base_delay_fwd: SimDuration
    base_delay_bwd: SimDuration
    jitter: Jitter = field(default=NO_JITTER)
    drop_prob: float = 0.0

    def __post_init__(self) -> None:
        if self.base_delay_fwd.ps <= 0 or self.base_delay_bwd.ps <= 0:
            raise ValueError("base delays must be positive")
        if not 0 <= self.drop_prob < 1:
            raise ValueError("drop_prob must lie in [0, 1)")

    @classmethod
    def symmetric(cls, delay: SimDuration, jitter: Jitter = NO_JITTER) -> PathModel:
        return cls(delay, delay, jitter)

    def base(self, direction: Direction) -> SimDuration:
        return self.base_delay_fwd if direction is Direction.FORWARD else self.base_delay_bwd

    @property
    def asymmetry(self) -> SimDuration:
        return self.base_delay_fwd - self.base_delay_bwd


def sample_delay_parts(path: PathModel, direction: Direction, rng: np.random.Generator) -> tuple[int, int]:
    """(base, queuing excess) in ps for one traversal."""
    return path.base(direction).ps, path.jitter.sample(rng)


def sample_delay(path: PathModel, direction: Direction, rng: np.random.Generator) -> SimDuration:
    base, excess = sample_delay_parts(path, Direction(direction), rng)
    return SimDuration(base + excess)


@dataclass(frozen=True)
class FiberLink:
    """One strand carrying two wavelengths, one per direction."""

    length_m: float
    index_fwd: float = 1.4682
    index_bwd: float = 1.4679
    calibrated_asymmetry: SimDuration | None = None

    def __post_init__(self) -> None:
        if self.length_m < 0:
            raise ValueError("fiber length must be non-negative")
        if self.index_fwd < 1 or self.index_bwd < 1:
            raise ValueError("refractive indices must be >= 1")

    def delay(self, direction: Direction) -> SimDuration:
        n = self.index_fwd if direction is Direction.FORWARD else self.index_bwd
        return SimDuration(round(self.length_m * n / SPEED_OF_LIGHT * PS_PER_S))

    def as_path(self) -> PathModel:
        """Deterministic packet path over this fiber (no queuing)."""
        return PathModel(self.delay(Direction.FORWARD), self.delay(Direction.BACKWARD))


def fiber_asymmetry(link: FiberLink) -> SimDuration:
    """delay_fwd - delay_bwd, rounded once to the picosecond."""
    return SimDuration(round(link.length_m * (link.index_fwd - link.index_bwd) / SPEED_OF_LIGHT * PS_PER_S))


@dataclass(frozen=True)
class CableModel:
    length_m: float
    velocity_factor: float = 0.66

    def __post_init__(self) -> None:
        if not 0 < self.velocity_factor < 1:
            raise ConfigurationError("velocity_factor must lie strictly between 0 and 1")
        if self.length_m < 0:
            raise ValueError("cable length must be non-negative")


def cable_delay(cable: CableModel) -> SimDuration:
    return SimDuration(round(cable.length_m / (cable.velocity_factor * SPEED_OF_LIGHT) * PS_PER_S))
