"""Command-line surface: validate scenarios, run them, emit reports.

Subcommands:
  validate <scenario>            exit 0 iff the scenario parses and validates
  run <scenario> | --batch DIR   simulate, writing report + chart + log files
  report --from <runresult>      re-derive report/chart without re-simulating

Exit codes: 0 success, 1 validation error, 2 degraded run (unfinished work
after capacity loss), 3 I/O error. Diagnostics go to stderr; data goes to
files only.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .engine import STATUS_DEGRADED, RunResult, run_scenario
from .model import ScenarioError, validate_scenario
from .report import (
    ScenarioFormatError,
    chart_to_text,
    load_scenario,
    row_from_result,
    write_chart_data,
    write_report,
)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_DEGRADED = 2
EXIT_IO = 3


def _err(message: str) -> None:
    print(message, file=sys.stderr)


def _load_and_validate(path: str):
    scenario = load_scenario(path)
    errors = validate_scenario(scenario)
    if errors:
        raise ScenarioFormatError(errors)
    return scenario


def _write_outputs(result: RunResult, outdir: Path, fmt: str, chart: bool = True) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    rows = [row_from_result(result)]
    ext = "csv" if fmt == "csv" else "json"
    meta = {"seed": result.seed} if fmt == "json" else None
    (outdir / f"report.{ext}").write_text(
        write_report(rows, fmt, meta=meta), encoding="utf-8"
    )
    if chart:
        (outdir / "chart.json").write_text(
            chart_to_text(write_chart_data(rows)), encoding="utf-8"
        )
    (outdir / "central_log.json").write_text(
        json.dumps({"entries": [e.to_dict() for e in result.log]}, indent=2) + "\n",
        encoding="utf-8",
    )
    (outdir / "runresult.json").write_text(
        json.dumps(result.to_json_dict(), indent=2) + "\n", encoding="utf-8"
    )


def _cmd_validate(args: argparse.Namespace) -> int:
    try:
        _load_and_validate(args.scenario)
    except ScenarioFormatError as exc:
        for line in exc.errors:
            _err(line)
        return EXIT_INVALID
    except OSError as exc:
        _err(str(exc))
        return EXIT_IO
    return EXIT_OK


def _run_one(path: Path, args: argparse.Namespace, out_root: Path | None) -> RunResult:
    """Run one scenario file; outputs go under ``out_root``/<scenario name>
    (or exactly ``--out`` for a single, non-batch run)."""
    scenario = _load_and_validate(str(path))
    if out_root is None:
        outdir = Path(args.out)
    else:
        outdir = out_root / scenario.name
    result = run_scenario(
        scenario,
        seed=args.seed,
        lose_progress_since_log=args.lose_progress_since_log,
    )
    _write_outputs(result, outdir, args.format)
    _err(
        f"{scenario.name}: {result.status}, makespan {result.makespan_ms} ms, "
        f"outputs in {outdir}"
    )
    return result


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        if args.batch:
            batch_dir = Path(args.batch)
            files = sorted(batch_dir.glob("*.scenario"))
            if not files:
                _err(f"no .scenario files in {batch_dir}")
                return EXIT_INVALID
            out_root = Path(args.out) if args.out else Path("out")
            results = []
            for path in files:
                results.append(_run_one(path, args, out_root))
            rows = [row_from_result(r) for r in results]
            ext = "csv" if args.format == "csv" else "json"
            meta = (
                {"seed": [r.seed for r in results]} if args.format == "json" else None
            )
            out_root.mkdir(parents=True, exist_ok=True)
            (out_root / f"report.{ext}").write_text(
                write_report(rows, args.format, meta=meta), encoding="utf-8"
            )
            (out_root / "chart.json").write_text(
                chart_to_text(write_chart_data(rows)), encoding="utf-8"
            )
            degraded = any(r.status == STATUS_DEGRADED for r in results)
            return EXIT_DEGRADED if degraded else EXIT_OK
        if not args.scenario:
            _err("run: a scenario file or --batch directory is required")
            return EXIT_INVALID
        out_root = None if args.out else Path("out")
        result = _run_one(Path(args.scenario), args, out_root)
        return EXIT_DEGRADED if result.status == STATUS_DEGRADED else EXIT_OK
    except ScenarioFormatError as exc:
        for line in exc.errors:
            _err(line)
        return EXIT_INVALID
    except ScenarioError as exc:
        _err(str(exc))
        return EXIT_INVALID
    except OSError as exc:
        _err(str(exc))
        return EXIT_IO


def _cmd_report(args: argparse.Namespace) -> int:
    try:
        raw = json.loads(Path(args.source).read_text(encoding="utf-8"))
        result = RunResult.from_json_dict(raw)
    except OSError as exc:
        _err(str(exc))
        return EXIT_IO
    except (KeyError, ValueError) as exc:
        _err(f"not a run result document: {exc}")
        return EXIT_INVALID
    outdir = Path(args.out) if args.out else Path("out") / result.scenario_name
    outdir.mkdir(parents=True, exist_ok=True)
    rows = [row_from_result(result)]
    ext = "csv" if args.format == "csv" else "json"
    meta = {"seed": result.seed} if args.format == "json" else None
    (outdir / f"report.{ext}").write_text(
        write_report(rows, args.format, meta=meta), encoding="utf-8"
    )
    if args.chart:
        (outdir / "chart.json").write_text(
            chart_to_text(write_chart_data(rows)), encoding="utf-8"
        )
    _err(f"{result.scenario_name}: report re-derived into {outdir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mccsim",
        description="Discrete-event simulator for mobile-cloud workloads "
        "on federated cloud nodes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="check a scenario file")
    p_validate.add_argument("scenario", help="path to a .scenario file")
    p_validate.set_defaults(func=_cmd_validate)

    p_run = sub.add_parser("run", help="simulate one scenario or a directory")
    p_run.add_argument("scenario", nargs="?", help="path to a .scenario file")
    p_run.add_argument("--batch", metavar="DIR", help="run every scenario in DIR")
    p_run.add_argument("--out", metavar="DIR", help="output directory")
    p_run.add_argument("--format", choices=("csv", "json"), default="csv")
    p_run.add_argument("--seed", type=int, default=None, help="override scenario seed")
    p_run.add_argument(
        "--lose-progress-since-log",
        action="store_true",
        help="on node failure, resume from the last logged progress instead "
        "of the exact failure instant",
    )
    p_run.set_defaults(func=_cmd_run)

    p_report = sub.add_parser("report", help="re-derive outputs from a run result")
    p_report.add_argument(
        "--from", dest="source", required=True, metavar="RUNRESULT",
        help="path to a runresult.json written by `run`",
    )
    p_report.add_argument("--chart", action="store_true", help="also write chart data")
    p_report.add_argument("--out", metavar="DIR", help="output directory")
    p_report.add_argument("--format", choices=("csv", "json"), default="csv")
    p_report.set_defaults(func=_cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
