from __future__ import annotations

import copy
import json
from pathlib import Path

import pytest

from chronosim.cli import main
from chronosim.harness import (
    CausalityError,
    ConfigError,
    Engine,
    EventQueue,
    Streams,
    compare_protocols,
    format_table,
    load_config,
    run_scenario,
    validate_config,
)
from chronosim.protocols import Protocol

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

MINIMAL = {
    "name": "minimal",
    "seed": 5,
    "duration_s": 2,
    "nodes": [
        {"name": "A", "oscillator": "RUBIDIUM"},
        {"name": "B", "oscillator": "OCXO"},
    ],
    "links": [{"endpoints": ["A", "B"], "path": {"delay_us": 50}}],
    "protocol": {"name": "PTP_HW", "interval_ms": 250},
    "outputs": {"cadence_ms": 10},
}


def minimal(**changes):
    cfg = copy.deepcopy(MINIMAL)
    cfg.update(changes)
    return cfg


# -- engine --------------------------------------------------------------


def test_queue_is_fifo_on_ties():
    q = EventQueue()
    for tag in "abc":
        q.push(5, print, (tag,))
    q.push(1, print, ("first",))
    order = [q.pop()[3][0] for _ in range(4)]
    assert order == ["first", "a", "b", "c"]


def test_engine_runs_in_time_order():
    eng, seen = Engine(), []
    for t in (30, 10, 20, 10):
        eng.schedule(t, lambda t=t: seen.append((eng.now, t)))
    eng.run(25)
    assert seen == [(10, 10), (10, 10), (20, 20)]
    eng.run(100)
    assert seen[-1] == (30, 30)


def test_engine_rejects_the_past():
    eng = Engine()
    eng.schedule(10, lambda: eng.schedule(5, lambda: None))
    with pytest.raises(CausalityError):
        eng.run(100)


def test_spawned_procedure_resumes_at_yields():
    eng, stamps = Engine(), []

    def proc():
        for t in (3, 7, 7, 12):
            yield t
            stamps.append(eng.now)
        return "done"

    results = []
    eng.spawn(proc(), results.append)
    eng.run(100)
    assert stamps == [3, 7, 7, 12]
    assert results == ["done"]


def test_streams_are_independent_by_key():
    a = Streams(1).get("osc", "x").random(3)
    assert (Streams(1).get("osc", "x").random(3) == a).all()
    assert not (Streams(1).get("osc", "y").random(3) == a).all()
    assert not (Streams(2).get("osc", "x").random(3) == a).all()


# -- config validation ---------------------------------------------------


def test_minimal_config_parses():
    cfg = validate_config(MINIMAL)
    assert cfg.protocol.name is Protocol.PTP_HW
    assert [n.name for n in cfg.nodes] == ["A", "B"]
    assert cfg.duration_ps == 2 * 10**12
    assert validate_config(json.dumps(MINIMAL)) == cfg


def _errors(raw) -> list[str]:
    with pytest.raises(ConfigError) as exc:
        validate_config(raw)
    return exc.value.errors


def test_undefined_node_is_named():
    raw = minimal(links=[{"endpoints": ["A", "C"], "path": {"delay_us": 50}}])
    errs = _errors(raw)
    assert any("'C'" in e for e in errs)


def test_jitter_bounds_error_names_field():
    raw = minimal(links=[{"endpoints": ["A", "B"], "path": {"delay_us": 50, "jitter": {"kind": "uniform", "lo_ps": 10, "hi_ps": 5}}}])
    assert any(e.startswith("links[0].path.jitter.hi_ps") for e in _errors(raw))


def test_missing_seed():
    raw = minimal()
    del raw["seed"]
    assert any(e.startswith("seed") for e in _errors(raw))
    assert validate_config(raw, seed=9).seed == 9


def test_unknown_preset():
    raw = minimal()
    raw["nodes"][0]["oscillator"] = "QUARTZ"
    assert any("QUARTZ" in e for e in _errors(raw))


def test_non_positive_duration():
    assert any(e.startswith("duration_s") for e in _errors(minimal(duration_s=0)))


def test_errors_are_collected_together():
    raw = minimal(duration_s=-1)
    del raw["seed"]
    raw["nodes"][1]["oscillator"] = "NOPE"
    assert len(_errors(raw)) >= 3


def test_slave_must_be_tunable():
    raw = minimal()
    raw["nodes"][1]["oscillator"] = "XO"
    assert any("tunable" in e for e in _errors(raw))


def test_sync_loop_rejected():
    raw = minimal(links=[
        {"endpoints": ["A", "B"], "path": {"delay_us": 50}},
        {"endpoints": ["B", "A"], "path": {"delay_us": 50}},
    ])
    assert _errors(raw)


def test_white_rabbit_needs_fiber():
    raw = minimal(protocol={"name": "WHITE_RABBIT"})
    assert any("fiber" in e for e in _errors(raw))


def test_shipped_scenarios_validate():
    files = sorted(SCENARIOS.glob("*.json"))
    assert files
    for f in files:
        load_config(str(f))


# -- running -------------------------------------------------------------


def test_ideal_round_trip_has_no_error():
    rep = run_scenario(load_config(str(SCENARIOS / "round_trip_ideal.json")))
    assert all(r.full.max_abs_error.ps == 0 for r in rep.nodes.values())


def test_csv_bytes_reproducible(tmp_path):
    cfg = validate_config(minimal())
    run_scenario(cfg, tmp_path / "one", plots=False)
    run_scenario(validate_config(minimal()), tmp_path / "two", plots=False)
    for name in ("series_A.csv", "series_B.csv", "report.json"):
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()


def test_seed_changes_output():
    a = run_scenario(validate_config(minimal()))
    b = run_scenario(validate_config(minimal(seed=6)))
    assert a.nodes["B"].series.errors_ps != b.nodes["B"].series.errors_ps


def test_adding_a_node_keeps_other_noise():
    base = run_scenario(validate_config(minimal()))
    raw = minimal()
    raw["nodes"].append({"name": "Z", "oscillator": "OCXO"})
    raw["links"].append({"endpoints": ["A", "Z"], "path": {"delay_us": 80}})
    more = run_scenario(validate_config(raw))
    assert more.nodes["A"].series.errors_ps == base.nodes["A"].series.errors_ps
    assert more.nodes["B"].series.errors_ps == base.nodes["B"].series.errors_ps


def test_report_contents():
    rep = run_scenario(validate_config(minimal()))
    d = json.loads(rep.to_json())
    assert d["seed"] == 5 and d["version"]
    assert d["nodes"]["B"]["reference"] == "A"
    assert d["nodes"]["A"]["reference"] == "true_time"
    assert d["scenario"]["name"] == "minimal"


# -- compare -------------------------------------------------------------


def test_compare_single_config():
    rows, _ = compare_protocols([validate_config(minimal())])
    assert len(rows) == 1 and rows[0].rank == 1


def test_compare_identical_configs_tie():
    rows, _ = compare_protocols([validate_config(minimal()), validate_config(minimal())])
    assert rows[0].steady_max_abs_error_ps == rows[1].steady_max_abs_error_ps
    assert rows[0].steady_rms_error_ps == rows[1].steady_rms_error_ps


def test_compare_rejects_other_topology():
    other = minimal(links=[{"endpoints": ["B", "A"], "path": {"delay_us": 50}}])
    other["nodes"][0]["oscillator"] = "OCXO"
    with pytest.raises(ConfigError):
        compare_protocols([validate_config(minimal()), validate_config(other)])
    with pytest.raises(ConfigError):
        compare_protocols([validate_config(minimal()), validate_config(minimal(seed=99))])


def test_table_format():
    rows, _ = compare_protocols([validate_config(minimal())])
    lines = format_table(rows, ";").splitlines()
    assert lines[0].split(";")[0] == "rank"
    assert lines[1].split(";")[2] == "PTP_HW"


# -- CLI -----------------------------------------------------------------


def _write(tmp_path, raw, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(raw))
    return str(p)


def test_cli_run_writes_outputs(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", "--config", _write(tmp_path, minimal()), "--out", str(out)]) == 0
    names = {p.name for p in out.iterdir()}
    assert {"series_A.csv", "series_B.csv", "report.json", "offset_error.png", "adev.png"} <= names
    assert (out / "series_B.csv").read_text().startswith("t_ps,offset_error_ps\n")
    assert "B" in capsys.readouterr().out


def test_cli_seed_override(tmp_path):
    cfg = _write(tmp_path, minimal())
    main(["run", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "77", "--no-plots"])
    assert json.loads((tmp_path / "a" / "report.json").read_text())["seed"] == 77


def test_cli_validate(tmp_path, capsys):
    assert main(["validate", "--config", _write(tmp_path, minimal())]) == 0
    assert capsys.readouterr().out.startswith("ok:")
    bad = minimal(links=[{"endpoints": ["A", "C"], "path": {"delay_us": 1}}])
    assert main(["validate", "--config", _write(tmp_path, bad, "bad.json")]) == 1
    assert "'C'" in capsys.readouterr().err


def test_cli_missing_file(tmp_path):
    assert main(["validate", "--config", str(tmp_path / "nope.json")]) == 1


def test_cli_runtime_error(tmp_path, monkeypatch, capsys):
    import chronosim.cli as cli

    def boom(*a, **k):
        raise RuntimeError("disk on fire")

    monkeypatch.setattr(cli, "run_scenario", boom)
    assert main(["run", "--config", _write(tmp_path, minimal()), "--out", str(tmp_path / "o")]) == 2
    assert "disk on fire" in capsys.readouterr().err


def test_cli_compare(tmp_path, capsys):
    a = _write(tmp_path, minimal(name="a"), "a.json")
    b = _write(tmp_path, minimal(name="b", protocol={"name": "NTP_STYLE", "interval_ms": 250}), "b.json")
    out = tmp_path / "cmp"
    assert main(["compare", "--configs", a, b, "--out", str(out), "--sep", "\t"]) == 0
    text = capsys.readouterr().out
    assert text.splitlines()[0].split("\t")[0] == "rank"
    assert (out / "ranking.csv").exists() and (out / "ranking.png").exists()
    c = _write(tmp_path, minimal(name="c", seed=1), "c.json")
    assert main(["compare", "--configs", a, c]) == 1
