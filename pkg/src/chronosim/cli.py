"""chronosim command line: run, compare, validate.

Exit codes: 0 success, 1 validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from chronosim import __version__
from chronosim.harness import ConfigError, compare_protocols, format_table, load_config, run_scenario
from chronosim.timebase import PS_PER_S

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2

log = logging.getLogger("chronosim")


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chronosim", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"chronosim {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario and write its outputs")
    run.add_argument("--config", required=True, help="scenario JSON file")
    run.add_argument("--seed", type=_seed, help="overrides the seed in the config file")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--no-plots", action="store_true", help="skip the PNG figures")

    cmp_ = sub.add_parser("compare", help="rank protocol settings on one topology")
    cmp_.add_argument("--configs", nargs="+", required=True, help="scenario files sharing nodes, links and seed")
    cmp_.add_argument("--seed", type=_seed, help="overrides every config's seed")
    cmp_.add_argument("--out", help="also write ranking.csv and ranking.png here")
    cmp_.add_argument("--sep", default=",", help="column separator for the table (default ',')")
    cmp_.add_argument("--no-plots", action="store_true")

    val = sub.add_parser("validate", help="check a scenario file")
    val.add_argument("--config", required=True, help="scenario JSON file")
    return p


def _setup_logging() -> None:
    level = os.environ.get("CHRONOSIM_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _load(args) -> list:
    if args.command == "compare":
        return [load_config(path, seed=args.seed) for path in args.configs]
    return [load_config(args.config, seed=getattr(args, "seed", None))]


def _cmd_run(args, configs) -> int:
    report = run_scenario(configs[0], args.out, plots=False if args.no_plots else None)
    for name, res in report.nodes.items():
        print(
            f"{name}\tvs {res.reference}\tsteady max|err| {res.steady.max_abs_error.ps} ps"
            f"\trms {res.steady.rms_error.ps} ps"
        )
    return EXIT_OK


def _cmd_compare(args, configs) -> int:
    rows, _ = compare_protocols(configs)
    sys.stdout.write(format_table(rows, args.sep))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "ranking.csv").write_text(format_table(rows, ","), encoding="utf-8")
        if not args.no_plots:
            from chronosim.plotting import render_ranking

            render_ranking(rows, out)
    return EXIT_OK


def _cmd_validate(args, configs) -> int:
    cfg = configs[0]
    print(
        f"ok: {cfg.name}: {len(cfg.nodes)} nodes, {len(cfg.links)} links, "
        f"{cfg.protocol.name.value}, {cfg.duration_ps / PS_PER_S:g} s, seed {cfg.seed}"
    )
    return EXIT_OK


def _report_invalid(errors) -> int:
    for e in errors:
        print(f"error: {e}", file=sys.stderr)
    return EXIT_INVALID


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "compare": _cmd_compare, "validate": _cmd_validate}[args.command]
    try:
        configs = _load(args)
    except ConfigError as exc:
        return _report_invalid(exc.errors)
    except OSError as exc:
        return _report_invalid([f"{exc.filename}: {exc.strerror}"])
    try:
        return handler(args, configs)
    except ConfigError as exc:
        return _report_invalid(exc.errors)
    except Exception as exc:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
