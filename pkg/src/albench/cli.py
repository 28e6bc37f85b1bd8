"""Command-line interface.

Subcommands: run, sweep, report, regimes, export-plot. Exit codes: 0 on
success, 1 on usage errors, 2 on data/config errors. All randomness derives
from --seed / the config seeds.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .bench import (
    aggregate,
    build_dataset,
    hp_sweep,
    load_config,
    load_records,
    prepare_run,
    run_experiment,
    write_report_csv,
)
from .data import regime_for
from .domain import REGIME_NAMES


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit(2); we report exit 1
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="albench", description="Pool-based active-learning benchmark")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config file")
    common.add_argument("--out", help="output directory or file")
    common.add_argument("--seed", type=int, help="replace the config seeds with one seed")
    common.add_argument("--jobs", type=int, default=1, help="parallel seed workers")

    sub.add_parser("run", parents=[common], help="run the full experiment")
    sub.add_parser("sweep", parents=[common], help="run only the HP sweep")

    rep = sub.add_parser("report", parents=[common], help="aggregate runs into a CSV")
    rep.add_argument("--runs", required=True, help="directory holding run records")
    rep.add_argument("--baseline", default="random", help="baseline QM for deltas")

    reg = sub.add_parser("regimes", parents=[common], help="print the label-regime table")
    reg.add_argument("--classes", type=int, required=True)

    plot = sub.add_parser("export-plot", parents=[common], help="export plot-ready CSV")
    plot.add_argument("--runs", required=True, help="directory holding run records")
    return parser


def _require_config(args) -> object:
    if not args.config:
        raise UsageError("--config is required for this subcommand")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seeds=(args.seed,))
    return cfg


def _cmd_run(args) -> int:
    # --out picks the physical location only; the echoed config is untouched,
    # so identical configs produce byte-identical artifacts anywhere.
    cfg = _require_config(args)
    paths = run_experiment(cfg, out_dir=args.out, jobs=args.jobs)
    for name in sorted(paths):
        print(f"{name}: {paths[name]}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _require_config(args)
    dataset = build_dataset(cfg)
    _, _, state0, val_subset = prepare_run(cfg, dataset, cfg.seeds[0])
    _, report = hp_sweep(cfg, dataset, state0, val_subset, cfg.seeds[0])
    text = json.dumps(report, sort_keys=True, indent=2)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        print(args.out)
    else:
        print(text)
    return 0


def _cmd_report(args) -> int:
    groups = load_records(args.runs)
    curves = {qm: aggregate(records) for qm, records in groups.items()}
    out = Path(args.out) if args.out else Path(args.runs) / "report.csv"
    write_report_csv(curves, out, baseline=args.baseline)
    print(out)
    return 0


def _cmd_export_plot(args) -> int:
    groups = load_records(args.runs)
    curves = {qm: aggregate(records) for qm, records in groups.items()}
    out = Path(args.out) if args.out else Path(args.runs) / "curves.csv"
    write_report_csv(curves, out, baseline=None)
    print(out)
    return 0


def _cmd_regimes(args) -> int:
    header = f"{'regime':<8}{'start':>8}{'query':>8}{'steps':>8}{'final':>8}{'val':>8}"
    print(header)
    for name in REGIME_NAMES:
        regime = regime_for(args.classes, name)
        print(
            f"{name:<8}{regime.starting_budget:>8}{regime.query_size:>8}"
            f"{regime.query_steps:>8}{regime.final_budget:>8}{regime.val_size:>8}"
        )
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "report": _cmd_report,
    "export-plot": _cmd_export_plot,
    "regimes": _cmd_regimes,
}


def cli_main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
