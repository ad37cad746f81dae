"""Scenario files: JSON in, validated :class:`ScenarioConfig` out.

Validation collects every problem before failing, each message prefixed
with the path of the offending field.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, fields
from typing import Any

import numpy as np

from chronosim.channel import CableModel, FiberLink, Jitter, PathModel
from chronosim.harness.engine import Streams
from chronosim.oscillator import (
    DEFAULT_NOISE_STEP_PS,
    OscillatorClass,
    OscillatorModel,
    ServoState,
    TemperatureProfile,
)
from chronosim.protocols import Protocol, TimestampMode
from chronosim.protocols.capture import DEFAULT_SW_JITTER_PS
from chronosim.timebase import MAX_PS, PS_PER_MS, PS_PER_S, PS_PER_US, SimDuration

LINK_RATE_HZ = 125e6
_MODEL_FIELDS = {f.name for f in fields(OscillatorModel)}


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class NodeConfig:
    name: str
    model: OscillatorModel
    preset: str | None = None
    timestamping: TimestampMode = TimestampMode.HW
    sw_jitter_ps: int = DEFAULT_SW_JITTER_PS
    epoch_offset_ps: int = 0
    counter_hz: float = LINK_RATE_HZ


@dataclass
class LinkConfig:
    master: str
    slave: str
    path: PathModel | None = None
    fiber: FiberLink | None = None
    cable: CableModel | None = None
    receiver_position_m: tuple[float, float, float] | None = None


@dataclass
class ProtocolConfig:
    name: Protocol
    interval_ps: int = PS_PER_S
    servo: ServoState = field(default_factory=ServoState)
    step_threshold_ps: int = 0
    turnaround_ps: int = 10 * PS_PER_US
    tc_resolution_ps: int | None = None
    phase_resolution_ps: int = 10
    calibrated: bool = True
    tic_resolution_ps: int = 1
    reflect_delay_ps: int = 0
    lead_ps: int = PS_PER_MS
    n_satellites: int = 6
    pseudorange_noise_ps: float = 0.0
    cable_compensated: bool = True


@dataclass
class OutputConfig:
    cadence_ps: int = PS_PER_MS
    steady_state_fraction: float = 0.5
    plots: bool = True


@dataclass
class ScenarioConfig:
    name: str
    seed: int
    duration_ps: int
    nodes: list[NodeConfig]
    links: list[LinkConfig]
    protocol: ProtocolConfig
    outputs: OutputConfig = field(default_factory=OutputConfig)
    temperature: TemperatureProfile | None = None
    noise_step_ps: int = DEFAULT_NOISE_STEP_PS
    raw: dict = field(default_factory=dict, repr=False)

    def node(self, name: str) -> NodeConfig:
        return next(n for n in self.nodes if n.name == name)

    def topology(self) -> tuple:
        return (
            tuple(sorted(n.name for n in self.nodes)),
            tuple(sorted((l.master, l.slave) for l in self.links)),
        )


class _Collector:
    def __init__(self) -> None:
        self.errors: list[str] = []

    def add(self, where: str, msg: str) -> None:
        self.errors.append(f"{where.removeprefix('.')}: {msg}")


def _number(d: dict, key: str, where: str, err: _Collector, default=None, positive=False, integer=False):
    if key not in d:
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        err.add(f"{where}.{key}", f"expected a number, got {v!r}")
        return default
    if integer and not float(v).is_integer():
        err.add(f"{where}.{key}", f"expected an integer, got {v!r}")
        return default
    if positive and v <= 0:
        err.add(f"{where}.{key}", f"must be positive, got {v!r}")
        return default
    return int(v) if integer else v


def _time_ps(d: dict, base: str, where: str, err: _Collector, default=None, positive=True):
    """Read ``<base>_ps`` or ``<base>_s`` (or ``_ms``/``_us``) as integer picoseconds."""
    for suffix, scale in (("_ps", 1), ("_us", PS_PER_US), ("_ms", PS_PER_MS), ("_s", PS_PER_S)):
        key = base + suffix
        if key in d:
            v = _number(d, key, where, err, positive=positive)
            if v is None:
                return default
            ps = round(v * scale)
            if abs(ps) > MAX_PS:
                err.add(f"{where}.{key}", "outside the simulation time range")
                return default
            return ps
    return default


def _oscillator(spec: Any, where: str, err: _Collector, rng: np.random.Generator) -> tuple[OscillatorModel | None, str | None]:
    if isinstance(spec, str):
        spec = {"preset": spec}
    if not isinstance(spec, dict):
        err.add(where, "expected a preset name or an object")
        return None, None
    spec = dict(spec)
    preset = spec.pop("preset", None)
    unknown = set(spec) - _MODEL_FIELDS
    if unknown:
        err.add(where, f"unknown oscillator fields {sorted(unknown)}")
        return None, preset
    try:
        if preset is not None:
            if preset not in OscillatorClass.__members__:
                err.add(f"{where}.preset", f"unknown preset {preset!r} (known: {', '.join(OscillatorClass.__members__)})")
                return None, preset
            return OscillatorClass[preset].model(rng, **spec), preset
        if "nominal_hz" not in spec:
            err.add(where, "explicit oscillator needs nominal_hz (or give a preset)")
            return None, None
        return OscillatorModel(**spec), None
    except (TypeError, ValueError) as exc:
        err.add(where, str(exc))
        return None, preset


def _jitter(spec: Any, where: str, err: _Collector) -> Jitter | None:
    if spec is None:
        return Jitter()
    if not isinstance(spec, dict):
        err.add(where, "expected an object")
        return None
    kind = spec.get("kind", "none")
    if kind == "uniform":
        lo = _number(spec, "lo_ps", where, err, 0, integer=True)
        hi = _number(spec, "hi_ps", where, err, 0, integer=True)
        if lo is None or hi is None:
            return None
        if lo < 0:
            err.add(f"{where}.lo_ps", "must be non-negative")
            return None
        if hi < lo:
            err.add(f"{where}.hi_ps", f"hi_ps ({hi}) is below lo_ps ({lo})")
            return None
        return Jitter("uniform", lo_ps=lo, hi_ps=hi)
    if kind == "exponential":
        lo = _number(spec, "min_ps", where, err, 0, integer=True)
        mean = _number(spec, "mean_excess_ps", where, err, 0.0)
        if lo is None or mean is None:
            return None
        if lo < 0 or mean < 0:
            err.add(where, "min_ps and mean_excess_ps must be non-negative")
            return None
        return Jitter("exponential", min_ps=lo, mean_excess_ps=float(mean))
    if kind == "none":
        return Jitter()
    err.add(f"{where}.kind", f"unknown jitter kind {kind!r}")
    return None


def _path(spec: dict, where: str, err: _Collector) -> PathModel | None:
    if not isinstance(spec, dict):
        err.add(where, "expected an object")
        return None
    both = _time_ps(spec, "delay", where, err)
    fwd = _time_ps(spec, "delay_fwd", where, err, both)
    bwd = _time_ps(spec, "delay_bwd", where, err, both)
    if fwd is None or bwd is None:
        err.add(where, "needs delay_ps or both delay_fwd_ps and delay_bwd_ps")
        return None
    jitter = _jitter(spec.get("jitter"), f"{where}.jitter", err)
    drop = _number(spec, "drop_prob", where, err, 0.0)
    if jitter is None or drop is None:
        return None
    if not 0 <= drop < 1:
        err.add(f"{where}.drop_prob", "must lie in [0, 1)")
        return None
    return PathModel(SimDuration(fwd), SimDuration(bwd), jitter, float(drop))


def _fiber(spec: dict, where: str, err: _Collector) -> FiberLink | None:
    if not isinstance(spec, dict):
        err.add(where, "expected an object")
        return None
    try:
        kw = {k: spec[k] for k in ("length_m", "index_fwd", "index_bwd") if k in spec}
        if "length_m" not in kw:
            err.add(f"{where}.length_m", "required")
            return None
        cal = _time_ps(spec, "calibrated_asymmetry", where, err, positive=False)
        return FiberLink(**kw, calibrated_asymmetry=SimDuration(cal) if cal is not None else None)
    except (TypeError, ValueError) as exc:
        err.add(where, str(exc))
        return None


def _cable(spec: dict, where: str, err: _Collector) -> CableModel | None:
    if not isinstance(spec, dict) or "length_m" not in spec:
        err.add(where, "expected an object with length_m")
        return None
    try:
        return CableModel(spec["length_m"], spec.get("velocity_factor", 0.66))
    except (TypeError, ValueError) as exc:
        err.add(where, str(exc))
        return None


def _servo(spec: dict | None, where: str, err: _Collector) -> ServoState:
    if spec is None:
        return ServoState()
    if not isinstance(spec, dict):
        err.add(where, "expected an object")
        return ServoState()
    allowed = {"kp", "ki", "steer_limit", "lock_threshold_ps", "lock_count"}
    unknown = set(spec) - allowed
    if unknown:
        err.add(where, f"unknown servo fields {sorted(unknown)}")
    try:
        return ServoState(**{k: v for k, v in spec.items() if k in allowed})
    except (TypeError, ValueError) as exc:
        err.add(where, str(exc))
        return ServoState()


def _protocol(spec: Any, err: _Collector) -> ProtocolConfig | None:
    where = "protocol"
    if isinstance(spec, str):
        spec = {"name": spec}
    if not isinstance(spec, dict):
        err.add(where, "expected an object with a name")
        return None
    name = spec.get("name")
    if name not in Protocol.__members__:
        err.add(f"{where}.name", f"unknown protocol {name!r} (known: {', '.join(Protocol.__members__)})")
        return None
    proto = Protocol[name]
    cfg = ProtocolConfig(proto, servo=_servo(spec.get("servo"), f"{where}.servo", err))
    cfg.interval_ps = _time_ps(spec, "interval", where, err, PS_PER_S)
    if proto is Protocol.NTP_STYLE:
        # longer than the default software jitter so stamps rarely come out of order
        cfg.turnaround_ps = 200 * PS_PER_US
    cfg.turnaround_ps = _time_ps(spec, "turnaround", where, err, cfg.turnaround_ps)
    cfg.lead_ps = _time_ps(spec, "lead", where, err, cfg.lead_ps)
    cfg.reflect_delay_ps = _time_ps(spec, "reflect_delay", where, err, 0, positive=False)
    if proto is Protocol.WHITE_RABBIT:
        cfg.step_threshold_ps = PS_PER_US
    cfg.step_threshold_ps = _time_ps(spec, "step_threshold", where, err, cfg.step_threshold_ps, positive=False)
    if proto is Protocol.PTP_HW:
        cfg.tc_resolution_ps = 8000
        if spec.get("transparent_clocks") is False:
            cfg.tc_resolution_ps = None
    cfg.tc_resolution_ps = _time_ps(spec, "tc_resolution", where, err, cfg.tc_resolution_ps)
    cfg.phase_resolution_ps = _number(spec, "phase_resolution_ps", where, err, 10, positive=True, integer=True)
    cfg.tic_resolution_ps = _number(spec, "tic_resolution_ps", where, err, 1, positive=True, integer=True)
    cfg.n_satellites = _number(spec, "n_satellites", where, err, 6, positive=True, integer=True)
    cfg.pseudorange_noise_ps = _number(spec, "pseudorange_noise_ps", where, err, 0.0)
    for flag in ("calibrated", "cable_compensated"):
        if flag in spec:
            if not isinstance(spec[flag], bool):
                err.add(f"{where}.{flag}", "expected true or false")
            else:
                setattr(cfg, flag, spec[flag])
    if cfg.n_satellites is not None and cfg.n_satellites < 4:
        err.add(f"{where}.n_satellites", "need at least 4 satellites")
    return cfg


def validate_config(raw: str | bytes | dict, seed: int | None = None) -> ScenarioConfig:
    """Parse and validate a scenario.  ``seed`` overrides the file's seed.

    Raises :class:`ConfigError` listing every problem found.
    """
    err = _Collector()
    if isinstance(raw, (str, bytes)):
        try:
            raw = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"<file>: invalid JSON ({exc})"]) from None
    if not isinstance(raw, dict):
        raise ConfigError(["<root>: expected a JSON object"])
    raw = copy.deepcopy(raw)

    if seed is None:
        seed = raw.get("seed")
    if seed is None:
        err.add("seed", "missing (a seed is mandatory)")
    elif isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        err.add("seed", f"must be an unsigned 64-bit integer, got {seed!r}")
        seed = None
    else:
        raw["seed"] = seed

    duration = _time_ps(raw, "duration", "", err)
    if duration is None and not any(k.startswith("duration") for k in raw):
        err.add("duration_s", "missing")

    streams = Streams(seed if seed is not None else 0)
    nodes: list[NodeConfig] = []
    names: set[str] = set()
    raw_nodes = raw.get("nodes")
    if not isinstance(raw_nodes, list) or not raw_nodes:
        err.add("nodes", "expected a non-empty list")
        raw_nodes = []
    for i, nd in enumerate(raw_nodes):
        where = f"nodes[{i}]"
        if not isinstance(nd, dict) or not isinstance(nd.get("name"), str) or not nd["name"]:
            err.add(where, "each node needs a non-empty string name")
            continue
        name = nd["name"]
        if name in names:
            err.add(f"{where}.name", f"duplicate node name {name!r}")
            continue
        names.add(name)
        model, preset = _oscillator(nd.get("oscillator", "XO"), f"{where}.oscillator", err, streams.get("preset", name))
        mode = nd.get("timestamping", "hw")
        if mode not in ("hw", "sw"):
            err.add(f"{where}.timestamping", f"must be 'hw' or 'sw', got {mode!r}")
            mode = "hw"
        node = NodeConfig(name, model, preset, TimestampMode(mode))
        node.sw_jitter_ps = _time_ps(nd, "sw_jitter", where, err, DEFAULT_SW_JITTER_PS)
        node.epoch_offset_ps = _time_ps(nd, "epoch_offset", where, err, 0, positive=False)
        node.counter_hz = _number(nd, "counter_hz", where, err, LINK_RATE_HZ, positive=True)
        if model is not None:
            nodes.append(node)

    protocol = _protocol(raw.get("protocol"), err)

    links: list[LinkConfig] = []
    masters: dict[str, str] = {}
    raw_links = raw.get("links")
    if not isinstance(raw_links, list):
        err.add("links", "expected a list")
        raw_links = []
    for i, lk in enumerate(raw_links):
        where = f"links[{i}]"
        if not isinstance(lk, dict):
            err.add(where, "expected an object")
            continue
        ends = lk.get("endpoints")
        if not (isinstance(ends, list) and len(ends) == 2 and all(isinstance(e, str) for e in ends)):
            err.add(f"{where}.endpoints", "expected [master, slave] node names")
            continue
        ok = True
        for e in ends:
            if e not in names:
                err.add(f"{where}.endpoints", f"undefined node {e!r}")
                ok = False
        if ends[0] == ends[1]:
            err.add(f"{where}.endpoints", "a node cannot synchronize to itself")
            ok = False
        if ends[1] in masters:
            err.add(f"{where}.endpoints", f"node {ends[1]!r} already has master {masters[ends[1]]!r}")
            ok = False
        link = LinkConfig(ends[0], ends[1])
        if "path" in lk:
            link.path = _path(lk["path"], f"{where}.path", err)
        if "fiber" in lk:
            link.fiber = _fiber(lk["fiber"], f"{where}.fiber", err)
        if "cable" in lk:
            link.cable = _cable(lk["cable"], f"{where}.cable", err)
        if "receiver_position_m" in lk:
            pos = lk["receiver_position_m"]
            if not (isinstance(pos, list) and len(pos) == 3 and all(isinstance(c, (int, float)) for c in pos)):
                err.add(f"{where}.receiver_position_m", "expected [x, y, z] in metres")
            else:
                link.receiver_position_m = tuple(float(c) for c in pos)
        if protocol is not None:
            _check_medium(protocol.name, lk, where, err)
        if ok:
            masters[ends[1]] = ends[0]
            links.append(link)

    _check_cycles(masters, err)
    if protocol is not None:
        by_name = {n.name: n for n in nodes}
        for link in links:
            slave = by_name.get(link.slave)
            if slave is not None and not slave.model.tunable:
                idx = next(i for i, n in enumerate(raw_nodes) if isinstance(n, dict) and n.get("name") == link.slave)
                err.add(
                    f"nodes[{idx}].oscillator",
                    f"slave {link.slave!r} has no tuning port; set \"tunable\": true to discipline it",
                )
            master = by_name.get(link.master)
            if protocol.name is Protocol.WHITE_RABBIT and slave and master and slave.counter_hz != master.counter_hz:
                err.add(f"links[{links.index(link)}]", "White Rabbit needs equal counter_hz on both ends")

    outputs = OutputConfig()
    raw_out = raw.get("outputs", {})
    if not isinstance(raw_out, dict):
        err.add("outputs", "expected an object")
        raw_out = {}
    outputs.cadence_ps = _time_ps(raw_out, "cadence", "outputs", err, PS_PER_MS)
    frac = _number(raw_out, "steady_state_fraction", "outputs", err, 0.5)
    if frac is not None and not 0 < frac <= 1:
        err.add("outputs.steady_state_fraction", "must lie in (0, 1]")
    outputs.steady_state_fraction = frac if frac is not None else 0.5
    outputs.plots = bool(raw_out.get("plots", True))
    if duration is not None and outputs.cadence_ps and outputs.cadence_ps > duration:
        err.add("outputs.cadence_ps", "cadence exceeds the run duration")

    temperature = None
    if "temperature" in raw:
        t = raw["temperature"]
        try:
            pts = tuple((round(p[0] * PS_PER_S), float(p[1])) for p in t["points_s"])
            temperature = TemperatureProfile(pts, float(t.get("ref_k", 298.15)))
        except (KeyError, TypeError, IndexError, ValueError) as exc:
            err.add("temperature", f"expected {{'points_s': [[t_s, kelvin], ...], 'ref_k': K}} ({exc})")

    noise_step = _time_ps(raw, "noise_step", "", err, DEFAULT_NOISE_STEP_PS)

    if err.errors:
        raise ConfigError(err.errors)
    return ScenarioConfig(
        name=str(raw.get("name", "scenario")),
        seed=seed,
        duration_ps=duration,
        nodes=nodes,
        links=links,
        protocol=protocol,
        outputs=outputs,
        temperature=temperature,
        noise_step_ps=noise_step,
        raw=raw,
    )


def _check_medium(proto: Protocol, lk: dict, where: str, err: _Collector) -> None:
    if proto is Protocol.WHITE_RABBIT and "fiber" not in lk:
        err.add(where, "WHITE_RABBIT needs a fiber link")
    elif proto in (Protocol.NTP_STYLE, Protocol.PTP_HW, Protocol.TWSTT, Protocol.ROUND_TRIP):
        if "path" not in lk and "fiber" not in lk:
            err.add(where, f"{proto.value} needs a path (or fiber)")


def _check_cycles(masters: dict[str, str], err: _Collector) -> None:
    for start in masters:
        seen, node = {start}, start
        while node in masters:
            node = masters[node]
            if node in seen:
                err.add("links", f"synchronization loop through {node!r}")
                return
            seen.add(node)


def load_config(path: str, seed: int | None = None) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return validate_config(fh.read(), seed=seed)
