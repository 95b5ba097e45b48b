"""Command-line entry point: ``run``, ``sweep`` and ``linkbudget``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from .harness import AXES, ScenarioConfig, format_results, run_scenario, sweep
from .metrics import link_budget
from .signal import ConfigError


def load_config(path) -> ScenarioConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    try:
        return ScenarioConfig.from_dict(data)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_values(text: str) -> list:
    try:
        vals = [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --values list {text!r}") from exc
    if not vals:
        raise ConfigError("--values is empty")
    return vals


def _apply_overrides(cfg: ScenarioConfig, args) -> ScenarioConfig:
    if args.seed is not None:
        cfg = replace(cfg, master_seed=args.seed)
    if args.trials is not None:
        cfg = replace(cfg, trials=args.trials)
    return cfg


def _write(text: str, out) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mmwlin", description="Massive-MIMO receiver linearization simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON scenario file")
        p.add_argument("--seed", type=int, default=None, help="override master_seed")
        p.add_argument("--trials", type=int, default=None, help="override trial count")
        p.add_argument("--out", default=None, help="output path (default stdout)")
        p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
        p.add_argument("--jobs", type=int, default=1, help="parallel trials (joblib)")
        p.add_argument("--timing", action="store_true", help="write measured wall times instead of 0")

    p_run = sub.add_parser("run", help="simulate one configuration")
    common(p_run)
    p_run.add_argument("--per-trial", action="store_true", help="one row per trial instead of the mean")

    p_sw = sub.add_parser("sweep", help="sweep one parameter")
    common(p_sw)
    p_sw.add_argument("--axis", required=True, choices=AXES)
    p_sw.add_argument("--values", required=True, help="comma separated values")
    p_sw.add_argument("--per-trial", action="store_true")

    p_lb = sub.add_parser("linkbudget", help="per-element received power")
    p_lb.add_argument("--tx-dbm", type=float, required=True)
    p_lb.add_argument("--tx-gain", type=float, required=True)
    p_lb.add_argument("--pathloss", type=float, required=True)
    p_lb.add_argument("--rx-gain", type=float, required=True)
    p_lb.add_argument("--papr", type=float, required=True)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "linkbudget":
            rx, peak = link_budget(args.tx_dbm, args.tx_gain, args.pathloss, args.rx_gain, args.papr)
            print(f"rx_dbm={rx:.9g}")
            print(f"rx_peak_dbm={peak:.9g}")
            return 0
        cfg = _apply_overrides(load_config(args.config), args)
        if args.command == "run":
            from .harness import average_rows
            rows = run_scenario(cfg, n_jobs=args.jobs)
            if not args.per_trial:
                rows = average_rows(rows, cfg.master_seed)
        else:
            rows = sweep(cfg, args.axis, _parse_values(args.values),
                         average=not args.per_trial, n_jobs=args.jobs)
        _write(format_results(rows, args.format, include_timing=args.timing), args.out)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"mmwlin: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
