"""Offset-error series, summary statistics and overlapping Allan deviation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from chronosim.timebase import PS_PER_S, SimDuration, SimTime


@dataclass
class ErrorSeries:
    """Offset error samples at a uniform cadence, integer picoseconds."""

    times_ps: list[int] = field(default_factory=list)
    errors_ps: list[int] = field(default_factory=list)

    def append(self, t: SimTime, error: SimDuration) -> None:
        if self.times_ps and t.ps <= self.times_ps[-1]:
            raise ValueError("sample times must be strictly increasing")
        self.times_ps.append(t.ps)
        self.errors_ps.append(error.ps)

    def __len__(self) -> int:
        return len(self.times_ps)

    @property
    def cadence_ps(self) -> int:
        if len(self.times_ps) < 2:
            raise ValueError("cadence needs at least two samples")
        return self.times_ps[1] - self.times_ps[0]

    def tail(self, fraction: float) -> ErrorSeries:
        """The final ``fraction`` of the series (the steady-state window)."""
        start = len(self) - max(1, math.ceil(len(self) * fraction))
        return ErrorSeries(self.times_ps[start:], self.errors_ps[start:])

    def to_csv(self) -> str:
        lines = ["t_ps,offset_error_ps"]
        lines.extend(f"{t},{e}" for t, e in zip(self.times_ps, self.errors_ps))
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class AdevPoint:
    tau_s: float
    adev: float | None
    error: str | None = None


@dataclass
class StabilityReport:
    max_abs_error: SimDuration
    mean_error: SimDuration
    rms_error: SimDuration
    adev: list[AdevPoint] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "max_abs_error_ps": self.max_abs_error.ps,
            "mean_error_ps": self.mean_error.ps,
            "rms_error_ps": self.rms_error.ps,
            "adev": [[p.tau_s, p.adev] for p in self.adev if p.error is None],
        }


def _nearest_sqrt(q: Fraction) -> int:
    """Nearest integer to sqrt(q) for q >= 0, exactly (halves round up)."""
    r = math.isqrt(q.numerator // q.denominator)
    while (r + 1) ** 2 <= q:
        r += 1
    # round up when sqrt(q) >= r + 1/2, i.e. 4q >= (2r + 1)^2
    return r + 1 if 4 * q >= (2 * r + 1) ** 2 else r


def summarize(series: ErrorSeries | Sequence[int]) -> StabilityReport:
    """Max |error|, mean and rms, each rounded to the nearest picosecond exactly."""
    errors = series.errors_ps if isinstance(series, ErrorSeries) else list(series)
    if not errors:
        raise ValueError("cannot summarize an empty series")
    n = len(errors)
    total = sum(errors)
    squares = sum(e * e for e in errors)
    return StabilityReport(
        max_abs_error=SimDuration(max(abs(e) for e in errors)),
        mean_error=SimDuration(round(Fraction(total, n))),
        rms_error=SimDuration(_nearest_sqrt(Fraction(squares, n))),
    )


def _adev_from_sum(sum_sq: float | int, n_terms: int, tau_s: float) -> float:
    # phase in ps; sigma^2 = S / (2 (N - 2m) tau^2)
    return math.sqrt(sum_sq / (2 * n_terms)) / (tau_s * PS_PER_S)


def _second_difference_sum(x: np.ndarray, m: int) -> int | float:
    d = x[2 * m :] - 2 * x[m:-m] + x[: -2 * m]
    if x.dtype.kind in "iu":
        peak = int(np.abs(d).max()) if len(d) else 0
        if peak * peak * len(d) < 2**62:
            return int(np.dot(d, d))
        return sum(int(v) * int(v) for v in d)
    return float(np.dot(d, d))


def allan_deviation(phase_ps: Sequence[int] | np.ndarray, tau0_s: float, taus_s: Iterable[float]) -> list[AdevPoint]:
    """Overlapping Allan deviation of phase samples (ps) spaced ``tau0_s`` apart.

    Integer phase data is handled in exact integer arithmetic up to the
    final square root.  Each tau yields one point; a tau that is not a
    multiple of ``tau0_s`` or needs more data than available carries an
    ``error`` instead of a value.
    """
    x = np.asarray(phase_ps)
    if x.dtype.kind not in "iuf":
        x = x.astype(float)
    n = len(x)
    out = []
    for tau in taus_s:
        ratio = tau / tau0_s
        m = round(ratio)
        if m < 1 or abs(ratio - m) > 1e-9 * max(1.0, ratio):
            out.append(AdevPoint(tau, None, f"tau {tau} s is not a multiple of tau0 {tau0_s} s"))
            continue
        if n < 3 * m + 1:
            out.append(AdevPoint(tau, None, f"series of {n} samples too short for m={m}"))
            continue
        out.append(AdevPoint(tau, _adev_from_sum(_second_difference_sum(x, m), n - 2 * m, m * tau0_s)))
    return out


def octave_taus(n_samples: int, tau0_s: float) -> list[float]:
    """Power-of-two multiples of ``tau0_s`` with at least 3m+1 samples available."""
    taus, m = [], 1
    while 3 * m + 1 <= n_samples:
        taus.append(m * tau0_s)
        m *= 2
    return taus


def stability_report(series: ErrorSeries) -> StabilityReport:
    report = summarize(series)
    if len(series) >= 4:
        tau0 = series.cadence_ps / PS_PER_S
        report.adev = allan_deviation(series.errors_ps, tau0, octave_taus(len(series), tau0))
    return report
