"""Run a validated scenario on the event engine and write its outputs."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from chronosim import __version__
from chronosim.harness.config import LinkConfig, ScenarioConfig
from chronosim.harness.engine import Engine, Streams
from chronosim.metrics import ErrorSeries, StabilityReport, stability_report, summarize
from chronosim.oscillator import ClockState, attach_servo
from chronosim.protocols import Endpoint, Protocol, TimestampMode, WrConfig, calibrate_link, discipline
from chronosim.protocols.exchanges import gnss_epoch, round_trip_exchange, twstt_exchange, two_way_exchange
from chronosim.protocols.gnss import random_receiver
from chronosim.protocols.white_rabbit import wr_exchange
from chronosim.timebase import PS_PER_S, SimDuration, SimTime

log = logging.getLogger(__name__)

TRUE_TIME = "true_time"


@dataclass
class NodeResult:
    reference: str
    series: ErrorSeries
    full: StabilityReport
    steady: StabilityReport
    exchanges: int = 0
    failed_exchanges: int = 0

    def to_dict(self) -> dict:
        return {
            "reference": self.reference,
            "full": self.full.to_dict(),
            "steady_state": self.steady.to_dict(),
            "exchanges": self.exchanges,
            "failed_exchanges": self.failed_exchanges,
        }


@dataclass
class RunReport:
    name: str
    seed: int
    protocol: str
    scenario: dict
    nodes: dict[str, NodeResult] = field(default_factory=dict)
    calibrated_asymmetry_ps: dict[str, int] = field(default_factory=dict)
    version: str = __version__

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "name": self.name,
            "seed": self.seed,
            "protocol": self.protocol,
            "scenario": self.scenario,
            "calibrated_asymmetry_ps": self.calibrated_asymmetry_ps,
            "nodes": {k: v.to_dict() for k, v in self.nodes.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def synchronized(self) -> dict[str, NodeResult]:
        return {k: v for k, v in self.nodes.items() if v.reference != TRUE_TIME}

    def worst_steady_max_abs_ps(self) -> int:
        nodes = self.synchronized() or self.nodes
        return max(r.steady.max_abs_error.ps for r in nodes.values())


class _LinkDriver:
    """Starts one exchange per interval on a link and steers the slave with the result."""

    def __init__(self, engine: Engine, cfg: ScenarioConfig, link: LinkConfig,
                 master: Endpoint, slave: Endpoint, streams: Streams) -> None:
        self.engine, self.cfg, self.link = engine, cfg, link
        self.master, self.slave = master, slave
        self.proto = cfg.protocol
        self.rng = streams.get("link", link.master, link.slave)
        self.servo = attach_servo(slave.clock.model, self.proto.servo)
        self.interval = SimDuration(self.proto.interval_ps)
        self.exchanges = 0
        self.failed = 0
        self.wr = WrConfig(
            phase_resolution_ps=self.proto.phase_resolution_ps,
            turnaround_ps=self.proto.turnaround_ps,
            step_threshold_ps=self.proto.step_threshold_ps,
        )
        self.fiber = link.fiber
        self.path = link.path if link.path is not None else (link.fiber.as_path() if link.fiber else None)
        if self.proto.name is Protocol.GNSS:
            pos = link.receiver_position_m
            self.receiver_pos = np.array(pos) if pos is not None else random_receiver(streams.get("receiver", link.slave))

    def calibrate(self) -> None:
        """Pre-calibrate the fiber against the simulator's true offset at t = 0."""
        m, s = self.master.clock, self.slave.clock
        truth = s.local_time() - m.local_time()
        self.fiber = calibrate_link(m, s, self.fiber, truth, self.wr)

    def _procedure(self, now: int):
        p, name = self.proto, self.proto.name
        if name is Protocol.WHITE_RABBIT:
            fiber = self.fiber if p.calibrated else replace(self.fiber, calibrated_asymmetry=None)
            return wr_exchange(self.master.clock, self.slave.clock, fiber, self.wr, now)
        if name in (Protocol.NTP_STYLE, Protocol.PTP_HW):
            return two_way_exchange(
                self.slave, self.master, self.path, self.rng, now, p.turnaround_ps, p.tc_resolution_ps
            )
        if name is Protocol.TWSTT:
            return twstt_exchange(self.slave, self.master, self.path, self.rng, now, p.lead_ps, p.tic_resolution_ps)
        if name is Protocol.ROUND_TRIP:
            return round_trip_exchange(
                self.slave, self.master, self.path, self.rng, now, p.reflect_delay_ps, p.tic_resolution_ps
            )
        return gnss_epoch(
            self.slave, self.master, self.receiver_pos, self.rng, now, p.n_satellites,
            p.pseudorange_noise_ps, self.link.cable, p.cable_compensated, p.tic_resolution_ps,
        )

    def begin(self) -> None:
        now = self.engine.now
        self.engine.spawn(self._procedure(now), self.done)
        self.engine.schedule(now + self.interval.ps, self.begin)

    def done(self, est) -> None:
        self.exchanges += 1
        if est is None or est.flagged:
            self.failed += 1
            return
        self.slave.clock.advance(SimTime(self.engine.now))
        self.servo = discipline(
            self.slave.clock, self.servo, est.offset_delta, self.interval, self.proto.step_threshold_ps
        )


def _build_endpoints(cfg: ScenarioConfig, streams: Streams) -> dict[str, Endpoint]:
    eps = {}
    for node in cfg.nodes:
        mode = node.timestamping
        clock = ClockState(
            node.model,
            epoch_offset=SimDuration(node.epoch_offset_ps),
            temperature=cfg.temperature,
            counter_period_ps=round(PS_PER_S / node.counter_hz),
            noise_step_ps=cfg.noise_step_ps,
            rng=streams.get("osc", node.name),
            jitter_rng=streams.get("edge", node.name),
        )
        eps[node.name] = Endpoint(clock, mode, node.sw_jitter_ps, streams.get("sw", node.name))
    # packet protocols that name hardware stamping always capture in hardware
    if cfg.protocol.name in (Protocol.PTP_HW, Protocol.WHITE_RABBIT):
        for ep in eps.values():
            ep.mode = TimestampMode.HW
    return eps


def simulate(cfg: ScenarioConfig) -> RunReport:
    streams = Streams(cfg.seed)
    eps = _build_endpoints(cfg, streams)
    engine = Engine()
    drivers = [_LinkDriver(engine, cfg, link, eps[link.master], eps[link.slave], streams) for link in cfg.links]
    master_of = {l.slave: l.master for l in cfg.links}

    report = RunReport(cfg.name, cfg.seed, cfg.protocol.name.value, cfg.raw)
    for d in drivers:
        if cfg.protocol.name is Protocol.WHITE_RABBIT and cfg.protocol.calibrated and d.fiber.calibrated_asymmetry is None:
            d.calibrate()
            report.calibrated_asymmetry_ps[d.link.slave] = d.fiber.calibrated_asymmetry.ps
        engine.schedule(0, d.begin)

    series = {n.name: ErrorSeries() for n in cfg.nodes}
    order = [n.name for n in cfg.nodes]

    def sample() -> None:
        now = SimTime(engine.now)
        for name in order:
            eps[name].clock.advance(now)
        for name in order:
            local = eps[name].clock.local_time()
            ref = eps[master_of[name]].clock.local_time() if name in master_of else now
            series[name].append(now, local - ref)

    n_samples = cfg.duration_ps // cfg.outputs.cadence_ps
    for k in range(n_samples + 1):
        engine.schedule(k * cfg.outputs.cadence_ps, sample)
    engine.run(cfg.duration_ps)

    by_slave = {d.link.slave: d for d in drivers}
    for name in order:
        s = series[name]
        drv = by_slave.get(name)
        report.nodes[name] = NodeResult(
            reference=master_of.get(name, TRUE_TIME),
            series=s,
            full=stability_report(s),
            steady=summarize(s.tail(cfg.outputs.steady_state_fraction)),
            exchanges=drv.exchanges if drv else 0,
            failed_exchanges=drv.failed if drv else 0,
        )
    return report


def write_outputs(report: RunReport, out_dir: str | Path, plots: bool = True) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, res in report.nodes.items():
        p = out / f"series_{name}.csv"
        p.write_text(res.series.to_csv(), encoding="utf-8")
        written.append(p)
    p = out / "report.json"
    p.write_text(report.to_json(), encoding="utf-8")
    written.append(p)
    if plots:
        from chronosim import plotting

        written.extend(plotting.render_run(report, out))
    return written


def run_scenario(cfg: ScenarioConfig, out_dir: str | Path | None = None, plots: bool | None = None) -> RunReport:
    """Simulate ``cfg``; with ``out_dir`` also write series CSVs, report.json and figures."""
    log.info("running %s (%s, seed %d, %.3f s)", cfg.name, cfg.protocol.name.value, cfg.seed, cfg.duration_ps / PS_PER_S)
    report = simulate(cfg)
    if out_dir is not None:
        write_outputs(report, out_dir, cfg.outputs.plots if plots is None else plots)
    return report
