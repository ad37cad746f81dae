"""Independent forward models and brute-force references used by the tests.

Nothing here imports the estimators under test.  Conventions: B is the
initiator (slave), A the responder (master); ``delta`` is B's clock minus
A's; ``d_fwd`` is the B -> A leg and ``d_bwd`` the A -> B leg.
"""

from __future__ import annotations

import decimal
import math
from fractions import Fraction


def ntp_forward(t_b1: int, d_fwd: int, d_bwd: int, delta: int, turnaround: int) -> tuple[int, int, int, int]:
    """Four timestamps of one request/response, each read on its own clock."""
    t_a2 = t_b1 + d_fwd - delta
    t_a3 = t_a2 + turnaround
    t_b4 = t_a3 + d_bwd + delta
    return t_b1, t_a2, t_a3, t_b4


def twstt_forward(d_fwd: int, d_bwd: int, delta: int) -> tuple[int, int]:
    """Both sides transmit when their own clock reads the same value.

    B is ahead by delta so it transmits delta earlier in physical time.
    """
    tau_a = d_fwd - delta
    tau_b = d_bwd + delta
    return tau_a, tau_b


def round_trip_forward(
    d_fwd: int, d_bwd: int, delta: int, t_a: int, processing: int = 0
) -> tuple[int, int, int]:
    """Loop-back interval measured at B, then A's timestamp received on B's clock."""
    tau = d_fwd + processing + d_bwd
    t_b = t_a + d_bwd + delta
    return tau, t_a, t_b


def naive_summary(errors: list[int]) -> tuple[int, int, int]:
    """max |e|, mean (nearest, ties to even) and rms (nearest, ties up)."""
    n = len(errors)
    mx = max(abs(e) for e in errors)
    mean = round(Fraction(sum(errors), n))
    with decimal.localcontext() as ctx:
        ctx.prec = 80
        ms = decimal.Decimal(sum(e * e for e in errors)) / decimal.Decimal(n)
        rms = int(ms.sqrt().quantize(decimal.Decimal(1), rounding=decimal.ROUND_HALF_UP))
    return mx, mean, rms


def brute_adev(x: list[int], m: int, tau0_s: float) -> float:
    """Overlapping Allan deviation from the definition, by double loop.

    Averages of the fractional frequency over adjacent windows of m samples
    are differenced; the sums stay in integer ps so the result is exact up
    to the last square root.
    """
    n = len(x)
    steps = [x[k + 1] - x[k] for k in range(n - 1)]
    terms = n - 2 * m
    total = 0
    for i in range(terms):
        first = 0
        second = 0
        for k in range(m):
            first += steps[i + k]
            second += steps[i + m + k]
        total += (second - first) ** 2
    tau = m * tau0_s
    return math.sqrt(total / (2 * terms)) / (tau * 1e12)
