"""Acceptance criteria, each at its stated tolerance.

Run ``pytest tests/test_acceptance.py`` and read the "acceptance criteria"
section at the end of the report: one PASS/FAIL line per criterion.
"""

from __future__ import annotations

import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from oracles import brute_adev, ntp_forward, round_trip_forward, twstt_forward

from chronosim.channel import CableModel, cable_delay, fiber_asymmetry
from chronosim.harness import compare_protocols, load_config, run_scenario
from chronosim.metrics import allan_deviation
from chronosim.oscillator import (
    SECONDS_PER_YEAR,
    ClockState,
    OscillatorClass,
    OscillatorModel,
    advance,
    holdover_time_to,
    offset_between,
)
from chronosim.protocols import (
    Endpoint,
    NtpExchange,
    RoundTripExchange,
    TwsttExchange,
    collapsed_inequality,
    estimate,
    gnss_epoch,
    gnss_solve,
    one_way_probe_bounds,
    random_receiver,
    run_inline,
    synthetic_constellation,
    synthetic_observations,
)
from chronosim.timebase import PS_PER_NS, PS_PER_S, PS_PER_US, SimDuration, SimTime

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def scenario(name: str):
    return load_config(str(SCENARIOS / name))


def _records(d_fwd: int, d_bwd: int, delta: int, base: int):
    ntp = NtpExchange(*(SimTime(v) for v in ntp_forward(base, d_fwd, d_bwd, delta, 7919)))
    tau_a, tau_b = twstt_forward(d_fwd, d_bwd, delta)
    tw = TwsttExchange(SimDuration(tau_a), SimDuration(tau_b))
    tau, t_a, t_b = round_trip_forward(d_fwd, d_bwd, delta, base)
    rt = RoundTripExchange(SimDuration(tau), SimTime(t_a), SimTime(t_b))
    return ntp, tw, rt


@pytest.mark.criterion(1, "formula inversion, 10^4 truths per variant, exact, < 5 s")
def test_formula_inversion():
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    n = 10_000
    deltas = rng.integers(-10**12, 10**12, n)
    delays = np.abs(deltas) + rng.integers(1, 10**12, n)
    bases = rng.integers(0, 10**15, n)
    worst = [0, 0, 0]
    for d, delta, base in zip(delays.tolist(), deltas.tolist(), bases.tolist()):
        for i, rec in enumerate(_records(d, d, delta, base)):
            est = estimate(rec)
            worst[i] = max(worst[i], abs(est.offset_delta.ps - delta), abs(est.delay_d.ps - d))
    elapsed = time.perf_counter() - start
    assert worst == [0, 0, 0]
    assert elapsed < 5.0


@pytest.mark.criterion(2, "asymmetry law, 10^3 channels, error = (d_bwd - d_fwd)/2 exactly")
def test_asymmetry_law():
    rng = np.random.default_rng(2)
    for _ in range(1000):
        delta = int(rng.integers(-10**9, 10**9))
        d_fwd = abs(delta) + int(rng.integers(1, 10**10))
        # an even gap keeps the half-asymmetry on the picosecond grid
        d_bwd = abs(delta) + 1 + 2 * int(rng.integers(0, 10**10))
        if (d_bwd - d_fwd) % 2:
            d_bwd += 1
        law = Fraction(d_bwd - d_fwd, 2)
        for rec in _records(d_fwd, d_bwd, delta, int(rng.integers(0, 10**15))):
            assert estimate(rec).offset_delta.ps - delta == law


NOISY_WITHIN_100NS = 1000


@pytest.mark.criterion(3, "GNSS noiseless 10 ps / 1 mm; 10 ns noise |dDelta| < 100 ns in >= 95%; < 30 s")
def test_gnss_solver():
    rng = np.random.default_rng(3)
    start = time.perf_counter()
    for _ in range(1000):
        receiver = random_receiver(rng)
        offset = SimDuration(int(rng.integers(-10**9, 10**9)))
        sats = synthetic_constellation(receiver, 6, rng)
        sol = gnss_solve(synthetic_observations(receiver, offset, sats))
        assert sol.converged
        assert abs(sol.clock_offset.ps - offset.ps) <= 10
        assert np.linalg.norm(np.array(sol.position) - receiver) <= 1e-3
    within = 0
    for _ in range(1000):
        receiver = random_receiver(rng)
        offset = SimDuration(int(rng.integers(-10**9, 10**9)))
        sats = synthetic_constellation(receiver, 6, rng)
        obs = synthetic_observations(receiver, offset, sats, noise_ps=10 * PS_PER_NS, rng=rng)
        within += abs(gnss_solve(obs).clock_offset.ps - offset.ps) < 100 * PS_PER_NS
    elapsed = time.perf_counter() - start
    assert within / 1000 >= 0.95
    # frozen from the first run with this seed
    assert within == NOISY_WITHIN_100NS
    assert elapsed < 30.0


def _gnss_offset(cable, compensate, seed):
    ideal = OscillatorModel(10e6)
    sky, rx = Endpoint(ClockState(ideal)), Endpoint(ClockState(ideal))
    pos = random_receiver(np.random.default_rng([seed, 1]))
    est, _ = run_inline(gnss_epoch(rx, sky, pos, np.random.default_rng([seed, 2]), 0, cable=cable, compensate=compensate))
    return est.offset_delta.ps


@pytest.mark.criterion(4, "cable compensation, bias = cable delay within 1 ps for 1-100 m, removed when compensated")
def test_cable_compensation():
    for seed, length in enumerate(np.linspace(1, 100, 12)):
        cable = CableModel(float(length), 0.66)
        baseline = _gnss_offset(None, False, seed)
        raw = _gnss_offset(cable, False, seed)
        fixed = _gnss_offset(cable, True, seed)
        assert abs((raw - baseline) - cable_delay(cable).ps) <= 1
        assert abs(fixed - baseline) <= 1


@pytest.mark.criterion(5, "White Rabbit 10 km XO slave, calibrated < 1 ns; uncalibrated ~ asymmetry/2; < 60 s")
def test_white_rabbit_scenario():
    start = time.perf_counter()
    cal = run_scenario(scenario("wr_calibrated.json"))
    unc = run_scenario(scenario("wr_uncalibrated.json"))
    elapsed = time.perf_counter() - start
    cfg = scenario("wr_calibrated.json")
    link = cfg.links[0].fiber
    half = fiber_asymmetry(link).ps / 2
    assert cal.nodes["slave"].steady.max_abs_error.ps < 1000
    mean_unc = unc.nodes["slave"].steady.mean_error.ps
    assert abs(mean_unc - half) <= 0.1 * abs(half)
    assert elapsed < 60.0


@pytest.mark.criterion(6, "precision ladder WHITE_RABBIT < PTP_HW (sub-us) < NTP_STYLE (ms class)")
def test_precision_ladder():
    configs = [scenario(f"ladder_{p}.json") for p in ("ntp", "ptp", "wr")]
    rows, _ = compare_protocols(configs)
    assert [r.protocol for r in rows] == ["WHITE_RABBIT", "PTP_HW", "NTP_STYLE"]
    err = {r.protocol: r.steady_max_abs_error_ps for r in rows}
    assert err["WHITE_RABBIT"] < 1000
    assert err["PTP_HW"] < PS_PER_US
    # millisecond class: from a tenth of a millisecond up to a tenth of a second
    assert 100 * PS_PER_US <= err["NTP_STYLE"] < 100 * 10**9


@pytest.mark.criterion(7, "drift arithmetic: 20 ppm -> 20 us in 1 s; 1e-11 holdover to 1 ms ~ 3.17 years")
def test_drift_arithmetic():
    clock = ClockState(OscillatorClass.XO.model(freq_bias=20e-6).noiseless())
    advance(clock, SimTime(PS_PER_S))
    assert clock.local_time().ps - PS_PER_S == 20 * PS_PER_US
    years = holdover_time_to(1e-3, 1e-11) / SECONDS_PER_YEAR
    assert abs(years - 3.17) / 3.17 <= 0.005


@pytest.mark.criterion(8, "collapsed inequality holds for any offset; free-running clocks diverge without bound")
def test_huygens_properties():
    rng = np.random.default_rng(8)
    for _ in range(2000):
        d, d_prime = (int(v) for v in rng.integers(1, 10**9, 2))
        # offsets far beyond the delays, in both signs
        delta = int(rng.choice([-1, 1])) * int(rng.integers(0, 10**15))
        lo, hi = one_way_probe_bounds(SimTime(0), SimTime(d + delta), SimTime(10**13), SimTime(10**13 + d_prime - delta))
        assert lo < delta < hi
        assert collapsed_inequality(hi - delta, delta - lo)
    a = ClockState(OscillatorModel(10e6, freq_bias=3e-9))
    b = ClockState(OscillatorModel(10e6, freq_bias=-2e-9), epoch_offset=SimDuration(-40 * PS_PER_US))
    last = None
    for k in range(1, 12):
        t = SimTime(k * 10**4 * PS_PER_S)
        advance(a, t)
        advance(b, t)
        off = abs(offset_between(b, a).ps)
        if k > 1:
            assert off > last
        last = off
    assert last > 100 * PS_PER_US


@pytest.mark.criterion(9, "Allan deviation: double-loop oracle exact, white FM slope -1/2 within 10%, ramp invariance")
def test_allan_deviation():
    rng = np.random.default_rng(9)
    for _ in range(20):
        x = rng.integers(-10**9, 10**9, int(rng.integers(10, 200))).tolist()
        ms = [m for m in range(1, len(x)) if 3 * m + 1 <= len(x)]
        got = [p.adev for p in allan_deviation(x, 0.01, [m * 0.01 for m in ms])]
        assert got == [brute_adev(x, m, 0.01) for m in ms]
        ramp = [v + 17 + 9999 * i for i, v in enumerate(x)]
        assert [p.adev for p in allan_deviation(ramp, 0.01, [m * 0.01 for m in ms])] == got
    y = 1e-11 * rng.standard_normal(200_000)
    phase = np.concatenate([[0.0], np.cumsum(y)]) * PS_PER_S
    taus = [1, 2, 4, 8, 16]
    dev = [p.adev for p in allan_deviation(phase, 1.0, taus)]
    slope = np.polyfit(np.log10(taus), np.log10(dev), 1)[0]
    assert abs(slope + 0.5) <= 0.05


ACCEPTANCE_SCENARIOS = [
    "wr_calibrated.json",
    "wr_uncalibrated.json",
    "ladder_wr.json",
    "ladder_ptp.json",
    "ladder_ntp.json",
    "ntp_wan.json",
    "gnss_receiver.json",
    "round_trip_ideal.json",
]


@pytest.mark.criterion(10, "reproducibility: equal seeds give byte-identical CSV outputs")
@pytest.mark.parametrize("name", ACCEPTANCE_SCENARIOS)
def test_reproducible_outputs(name, tmp_path):
    run_scenario(scenario(name), tmp_path / "a", plots=False)
    run_scenario(scenario(name), tmp_path / "b", plots=False)
    csvs = sorted(p.name for p in (tmp_path / "a").glob("*.csv"))
    assert csvs
    for f in csvs + ["report.json"]:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
