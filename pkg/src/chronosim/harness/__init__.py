from chronosim.harness.compare import RankingRow, compare_protocols, format_table
from chronosim.harness.config import ConfigError, ScenarioConfig, load_config, validate_config
from chronosim.harness.engine import CausalityError, Engine, EventQueue, Streams
from chronosim.harness.scenario import RunReport, run_scenario, simulate, write_outputs

__all__ = [
    "CausalityError",
    "ConfigError",
    "Engine",
    "EventQueue",
    "RankingRow",
    "RunReport",
    "ScenarioConfig",
    "Streams",
    "compare_protocols",
    "format_table",
    "load_config",
    "run_scenario",
    "simulate",
    "validate_config",
    "write_outputs",
]
