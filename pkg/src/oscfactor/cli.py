"""Command-line front end: factor, curve, sweep, oracle-check.

Exit codes: 0 success, 1 error, 2 factoring found no pair. All files are
written atomically (temp file, then rename), so a crashed run never
leaves a truncated CSV behind. Output records carry no timestamps;
identical configs produce byte-identical CSVs.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import replace

import numpy as np

from . import config as cfgmod
from .config import RunConfig, load_config, preset, serialize_config
from .experiments import (
    ProtocolError,
    Scenario,
    _apply_axis,
    fidelity_curve,
    oracle_equivalence_report,
    run_protocol,
    sweep,
)

TWO_PI = 2.0 * math.pi


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); 2 means "no factors" here
        raise UsageError(message)


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".partial-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _emit(path: str | None, text: str) -> None:
    if path:
        _write_atomic(path, text)
    else:
        sys.stdout.write(text)


def _csv_text(columns: list[str], rows: list[dict], cfg: RunConfig, command: str) -> str:
    out = io.StringIO()
    out.write(f"# oscfactor {command} output\n")
    # the [run] section (paths, threads) never changes the numbers, so the
    # embedded record omits it and byte-compares across destinations
    record = replace(cfg, threads=None, out_csv=None, out_report=None)
    for line in serialize_config(record).strip().splitlines():
        out.write(f"# {line}\n" if line else "#\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) if c in row else "" for c in columns])
    return out.getvalue()


def _series_context(scenario: Scenario) -> dict:
    params = scenario.params
    if len(params.couplings) == 1:
        (order, strength), = params.couplings
        g_cell, k_cell = strength, str(order)
    else:
        g_cell, k_cell = params.min_positive_strength(), "multi"
    return {
        "g": g_cell,
        "k": k_cell,
        "alpha": abs(scenario.alpha),
        "gamma3": scenario.bath.gamma3 if scenario.bath is not None else 0.0,
        "N": scenario.N,
        "window_mode": scenario.mode,
    }


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="config file to start from")
    sub.add_argument("--preset", choices=cfgmod.PRESETS, help="bundled parameter set")
    sub.add_argument("--N", type=int)
    sub.add_argument("--alpha", type=float, help="probe amplitude modulus")
    sub.add_argument("--alpha-phase", type=float, dest="alpha_phase")
    sub.add_argument("--couplings", help="comma list of order:strength, e.g. '1:1.0,2:0.3'")
    sub.add_argument("--g", type=float, help="set the strength of every coupling")
    sub.add_argument("--k", type=int, help="set the order of a single coupling")
    sub.add_argument("--temperature", type=float)
    sub.add_argument("--tail-cutoff", type=float, dest="tail_cutoff")
    sub.add_argument("--gamma3", type=float)
    sub.add_argument("--nbar3", type=float)
    sub.add_argument("--probe", choices=cfgmod.PROBES)
    sub.add_argument("--window-mode", choices=["trial-window", "full-support"],
                     dest="window_mode")
    sub.add_argument("--window", help="explicit trial bounds lo:hi")
    sub.add_argument("--tau", help="measurement time, number or 'auto'")
    sub.add_argument("--tau-min", type=float, dest="tau_min")
    sub.add_argument("--tau-max", type=float, dest="tau_max")
    sub.add_argument("--points", type=int)
    sub.add_argument("--theta", type=float)
    sub.add_argument("--peak-floor", type=float, dest="peak_floor")
    sub.add_argument("--weight-threshold", type=float, dest="weight_threshold")
    sub.add_argument("--axis", choices=["alpha", "g", "k", "gamma3", "tau"])
    sub.add_argument("--values", help="comma list of axis values")
    sub.add_argument("--series-axis", dest="series_axis",
                     choices=["alpha", "g", "k", "gamma3"])
    sub.add_argument("--series-values", dest="series_values")
    sub.add_argument("--quantity", choices=cfgmod.QUANTITIES)
    sub.add_argument("--threads", type=int)
    sub.add_argument("--out", help="output CSV path (stdout when omitted)")
    sub.add_argument("--report", help="output JSON report path")


def _build_parser() -> _Parser:
    parser = _Parser(prog="oscfactor",
                     description="Simulator for conditional-measurement factoring "
                                 "with three coupled oscillators.")
    commands = parser.add_subparsers(dest="command")
    for name, text in (("factor", "run the full pipeline and report factor pairs"),
                       ("curve", "sample a fidelity curve to CSV"),
                       ("sweep", "evaluate one row per grid point to CSV")):
        sub = commands.add_parser(name, help=text)
        _add_common(sub)
    oc = commands.add_parser("oracle-check",
                             help="compare engines against the brute-force oracle")
    oc.add_argument("--quick", action="store_true", help="smoke subset, a few seconds")
    oc.add_argument("--dim", type=int, help="override the Fock truncation")
    return parser


def _parse_float_list(text: str) -> tuple:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _resolve_config(args, command: str) -> RunConfig:
    if args.config and args.preset:
        raise UsageError("give either --config or --preset, not both")
    if args.config:
        base = load_config(args.config)
    elif args.preset:
        base = preset(args.preset, command)
    else:
        base = RunConfig()

    updates = {}
    for name in ("N", "alpha", "alpha_phase", "temperature", "tail_cutoff", "gamma3",
                 "nbar3", "probe", "window_mode", "tau_min", "tau_max", "points",
                 "theta", "peak_floor", "weight_threshold", "axis", "series_axis",
                 "quantity", "threads"):
        value = getattr(args, name, None)
        if value is not None:
            updates[name] = value
    if args.tau is not None:
        updates["tau"] = "auto" if args.tau == "auto" else float(args.tau)
    if args.couplings is not None:
        updates["couplings"] = cfgmod._parse_couplings(args.couplings)
    if args.values is not None:
        updates["values"] = _parse_float_list(args.values)
    if args.series_values is not None:
        updates["series_values"] = _parse_float_list(args.series_values)
    if args.window is not None:
        lo, sep, hi = args.window.partition(":")
        if not sep:
            raise UsageError(f"bad window {args.window!r}, expected lo:hi")
        updates["n_min"], updates["n_max"] = int(lo), int(hi)
    if args.out is not None:
        updates["out_csv"] = args.out
    if getattr(args, "report", None) is not None:
        updates["out_report"] = args.report

    cfg = replace(base, **updates)
    if args.k is not None:
        if len(cfg.couplings) != 1:
            raise UsageError("--k needs exactly one coupling to rewrite; use --couplings")
        (_, strength), = cfg.couplings
        cfg = replace(cfg, couplings=((args.k, strength),))
    if args.g is not None:
        cfg = replace(cfg, couplings=tuple((k, args.g) for k, _ in cfg.couplings))
    cfgmod._validate(cfg)
    return cfg


def _report_payload(report) -> dict:
    return {
        "N": report.N,
        "pairs": [[r, s, w] for r, s, w in report.pairs],
        "tau": report.tau,
        "born_probability": report.born_probability,
        "ideal_probability": report.ideal_probability,
        "success": report.success,
        "contaminants": [[n, m, w] for n, m, w in report.contaminants],
        "notes": list(report.notes),
        "metadata": report.metadata,
    }


CURVE_COLUMNS = ["tau", "F", "g", "k", "alpha", "gamma3", "N", "window_mode"]


def _cmd_factor(args) -> int:
    cfg = _resolve_config(args, "factor")
    scenario = cfg.scenario()
    report, curve = run_protocol(scenario, tau=cfg.tau,
                                 weight_threshold=cfg.weight_threshold)
    text = json.dumps(_report_payload(report), indent=2) + "\n"
    if cfg.out_report:
        _write_atomic(cfg.out_report, text)
    sys.stdout.write(text)
    if cfg.out_csv:
        context = _series_context(scenario)
        rows = [{"tau": t, "F": v, **context}
                for t, v in zip(curve.tau_grid, curve.values)]
        _write_atomic(cfg.out_csv, _csv_text(CURVE_COLUMNS, rows, cfg, "factor"))
    return 0 if report.success else 2


def _curve_grid(cfg: RunConfig, scenario: Scenario) -> np.ndarray:
    if cfg.points < 2:
        raise ValueError("empty grid: need at least two points")
    tau_max = cfg.tau_max
    if tau_max is None:
        g = scenario.params.min_positive_strength()
        tau_max = min(TWO_PI / g if g > 0 else TWO_PI, 1.5 * TWO_PI)
    if tau_max <= cfg.tau_min:
        raise ValueError("empty grid: tau_max must exceed tau_min")
    return np.linspace(cfg.tau_min, tau_max, cfg.points)


def _cmd_curve(args) -> int:
    cfg = _resolve_config(args, "curve")
    base = cfg.scenario()
    if cfg.axis == "tau":
        raise UsageError("curve already sweeps tau; set --tau-min/--tau-max/--points")
    if cfg.axis is not None and len(cfg.values) == 0:
        raise ValueError("empty grid: --axis given without --values")
    grid = _curve_grid(cfg, base)
    rows: list[dict] = []
    variants = [_apply_axis(base, cfg.axis, v) for v in cfg.values] if cfg.axis else [base]
    for scenario in variants:
        series = fidelity_curve(scenario, tau_grid=grid, floor=cfg.peak_floor)
        context = _series_context(scenario)
        rows.extend({"tau": t, "F": v, **context}
                    for t, v in zip(series.tau_grid, series.values))
    _emit(cfg.out_csv, _csv_text(CURVE_COLUMNS, rows, cfg, "curve"))
    return 0


def _cmd_sweep(args) -> int:
    cfg = _resolve_config(args, "sweep")
    if cfg.axis is None:
        raise UsageError("sweep needs --axis (or a preset that sets one)")
    rows = sweep(cfg.scenario(), cfg.axis, cfg.values,
                 series_axis=cfg.series_axis, series_values=cfg.series_values,
                 quantity=cfg.quantity, tau=cfg.tau, theta=cfg.theta,
                 workers=cfg.threads)
    columns = [cfg.axis, "F", "born_probability", "ideal_probability"]
    if cfg.series_axis:
        columns.append(cfg.series_axis)
    columns.extend(["t_tilde", "theta"] if cfg.quantity == "threshold" else ["tau"])
    if any("error" in r for r in rows):
        columns.append("error")
    _emit(cfg.out_csv, _csv_text(columns, rows, cfg, "sweep"))
    return 0


def _cmd_oracle_check(args) -> int:
    result = oracle_equivalence_report(quick=args.quick, dim=args.dim)
    width = max(len(r["check"]) for r in result["rows"])
    for row in result["rows"]:
        status = "ok" if row["ok"] else "FAIL"
        tail = f"  [{row['error']}]" if "error" in row else ""
        print(f"{row['check']:<{width}}  points={row['points']:<4d} "
              f"max_dev={row['max_deviation']:.3e}  tol={row['tolerance']:.0e}  "
              f"{status}{tail}")
    print("all checks passed" if result["ok"] else "oracle disagreement detected")
    return 0 if result["ok"] else 1


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help()
            return 1
        if args.command == "factor":
            return _cmd_factor(args)
        if args.command == "curve":
            return _cmd_curve(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        return _cmd_oracle_check(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, ProtocolError, OverflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
