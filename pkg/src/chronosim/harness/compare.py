"""Run several protocol settings on one topology and rank them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from chronosim.harness.config import ConfigError, ScenarioConfig
from chronosim.harness.scenario import RunReport, run_scenario


@dataclass(frozen=True)
class RankingRow:
    rank: int
    name: str
    protocol: str
    worst_node: str
    steady_max_abs_error_ps: int
    steady_rms_error_ps: int


def compare_protocols(configs: Sequence[ScenarioConfig]) -> tuple[list[RankingRow], list[RunReport]]:
    """One run per config; rows sorted by steady-state max |error| of the worst synchronized node."""
    if not configs:
        raise ConfigError(["configs: nothing to compare"])
    topo, seed = configs[0].topology(), configs[0].seed
    errors = []
    for i, cfg in enumerate(configs[1:], start=1):
        if cfg.topology() != topo:
            errors.append(f"configs[{i}]: topology differs from configs[0] (nodes/links must match)")
        if cfg.seed != seed:
            errors.append(f"configs[{i}]: seed {cfg.seed} differs from configs[0] seed {seed}")
    if errors:
        raise ConfigError(errors)

    reports = [run_scenario(cfg) for cfg in configs]
    scored = []
    for idx, (cfg, rep) in enumerate(zip(configs, reports)):
        nodes = rep.synchronized() or rep.nodes
        worst = max(nodes, key=lambda n: (nodes[n].steady.max_abs_error.ps, n))
        res = nodes[worst]
        scored.append((res.steady.max_abs_error.ps, idx, cfg, worst, res))
    scored.sort(key=lambda s: (s[0], s[1]))
    rows = [
        RankingRow(rank, cfg.name, cfg.protocol.name.value, worst, err, res.steady.rms_error.ps)
        for rank, (err, _, cfg, worst, res) in enumerate(scored, start=1)
    ]
    return rows, reports


def format_table(rows: Sequence[RankingRow], sep: str = ",") -> str:
    header = ["rank", "name", "protocol", "worst_node", "steady_max_abs_error_ps", "steady_rms_error_ps"]
    lines = [sep.join(header)]
    for r in rows:
        lines.append(sep.join(str(v) for v in (
            r.rank, r.name, r.protocol, r.worst_node, r.steady_max_abs_error_ps, r.steady_rms_error_ps
        )))
    return "\n".join(lines) + "\n"
