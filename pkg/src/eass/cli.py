"""Command-line entry point: ``eass init | synth | run | sweep | forecast-eval``.

A run is described by one JSON document (see ``eass init``). Command-line
flags override individual fields, and ``EASS_OUTPUT_DIR`` overrides the
output directory. Relative input paths resolve against the config file.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import DataError, Dataset
from .domain import ConfigurationError
from .forecast import InsufficientHistoryError, LagSpec
from .sim import (
    SWEEP_AXES,
    ForecastSettings,
    Policy,
    SimConfig,
    forecast_horizon,
    run_horizon,
    sweep,
    sweep_csv,
)
from .synth import SyntheticSpec, generate_synthetic

logger = logging.getLogger("eass")

OUTPUT_ENV = "EASS_OUTPUT_DIR"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MISSING = 3
EXIT_WARMUP = 4
EXIT_VIOLATIONS = 5
EXIT_DATA = 6
EXIT_OUTPUT = 7


@dataclass(frozen=True)
class Paths:
    loads: str = "data/loads.csv"
    transformers: str = "data/transformers.csv"
    lmp: str = "data/lmp.csv"
    fuel_stats: str = "data/fuel_stats.csv"
    temperature: str | None = "data/temperature.csv"
    fuels: str | None = None
    output_dir: str = "out"


@dataclass(frozen=True)
class RunConfig:
    paths: Paths = field(default_factory=Paths)
    slot_minutes: int = 5
    policies: tuple[str, ...] = ("OfflineOptimal", "OnlineLP", "PreDay", "RobustRO")
    gamma: float = 15.0
    battery_hours: float = 1.0
    rate_hours: float | None = None
    penetration: float = 1.0
    eta_fraction: float = 0.01
    boundary_fraction: float = 0.5
    seed: int = 0
    warmup_days: int = 56
    eval_days: int | None = None
    recent_lags: int = 12
    daily_lags: int = 3
    weekly_lags: int = 2
    ridge: float = 1e-3
    sigma_window_days: int = 28
    sigma_multiplier: float = 1.5
    train_days: int = 56
    refit_days: int = 7

    def __post_init__(self):
        if not 0 <= self.penetration <= 1:
            raise ConfigurationError("penetration must lie in [0, 1]")
        if not 0 < self.eta_fraction <= 0.1:
            raise ConfigurationError("eta_fraction must lie in (0, 0.1]")
        if self.gamma < 0:
            raise ConfigurationError("gamma must be nonnegative")
        if 1440 % self.slot_minutes:
            raise ConfigurationError("slot_minutes must divide a day")
        for p in self.policies:
            try:
                Policy.parse(p)
            except ValueError as exc:
                raise ConfigurationError(str(exc)) from None

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["policies"] = list(self.policies)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigurationError("config must be a JSON object")
        d = dict(d)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigurationError(f"unknown config field(s): {', '.join(unknown)}")
        paths = d.pop("paths", {})
        path_keys = {f.name for f in dataclasses.fields(Paths)}
        if not isinstance(paths, dict) or set(paths) - path_keys:
            raise ConfigurationError(f"paths must be an object with keys among {sorted(path_keys)}")
        if "policies" in d:
            d["policies"] = tuple(d["policies"])
        try:
            return cls(paths=Paths(**paths), **d)
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from None

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config is not valid JSON: {exc}") from None

    def sim_config(self) -> SimConfig:
        return SimConfig(
            policies=tuple(Policy.parse(p, self.gamma) for p in self.policies),
            battery_hours=self.battery_hours,
            rate_hours=self.rate_hours,
            penetration=self.penetration,
            eta_fraction=self.eta_fraction,
            boundary_fraction=self.boundary_fraction,
            warmup_days=self.warmup_days,
            eval_days=self.eval_days,
            seed=self.seed,
            keep_schedules=False,
            forecast=ForecastSettings(
                lag_spec=LagSpec(self.recent_lags, self.daily_lags, self.weekly_lags),
                ridge=self.ridge,
                deviation_window=self.sigma_window_days,
                deviation_multiplier=self.sigma_multiplier,
                train_days=self.train_days,
                refit_days=self.refit_days,
            ),
        )


# --------------------------------------------------------------- helpers

class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def load_config(path: str | None) -> tuple[RunConfig, Path]:
    if path is None:
        return RunConfig(), Path.cwd()
    p = Path(path)
    if not p.is_file():
        raise CliError(EXIT_MISSING, f"config file not found: {p}")
    return RunConfig.from_json(p.read_text()), p.resolve().parent


def _override(config: RunConfig, args) -> RunConfig:
    changes = {}
    for name in ("gamma", "battery_hours", "rate_hours", "penetration", "eta_fraction", "seed",
                 "warmup_days", "eval_days"):
        value = getattr(args, name, None)
        if value is not None:
            changes[name] = value
    if getattr(args, "policies", None):
        changes["policies"] = tuple(p.strip() for p in args.policies.split(","))
    out = os.environ.get(OUTPUT_ENV) or getattr(args, "output_dir", None)
    if out:
        changes["paths"] = dataclasses.replace(config.paths, output_dir=out)
    return dataclasses.replace(config, **changes) if changes else config


def _resolve(base: Path, p: str | None) -> Path | None:
    if p is None:
        return None
    q = Path(p)
    return q if q.is_absolute() else base / q


def load_dataset(config: RunConfig, base: Path) -> Dataset:
    paths = config.paths
    try:
        return Dataset.read_csv(
            _resolve(base, paths.loads), _resolve(base, paths.transformers), _resolve(base, paths.lmp),
            _resolve(base, paths.fuel_stats), _resolve(base, paths.temperature), _resolve(base, paths.fuels),
            slot_minutes=config.slot_minutes,
        )
    except FileNotFoundError as exc:
        raise CliError(EXIT_MISSING, str(exc)) from None
    except (DataError, KeyError, ValueError) as exc:
        raise CliError(EXIT_DATA, f"malformed input data: {exc}") from None


def output_dir(config: RunConfig, base: Path) -> Path:
    out = Path(config.paths.output_dir)
    out = out if out.is_absolute() else base / out
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(EXIT_OUTPUT, f"cannot create output directory {out}: {exc}") from None
    return out


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text)
    except OSError as exc:
        raise CliError(EXIT_OUTPUT, f"cannot write {path}: {exc}") from None
    logger.info("wrote %s", path)


# -------------------------------------------------------------- commands

def cmd_init(args) -> int:
    config = RunConfig()
    if args.output == "-":
        sys.stdout.write(config.to_json())
    else:
        p = Path(args.output)
        if p.exists() and not args.force:
            raise CliError(EXIT_CONFIG, f"{p} exists; pass --force to overwrite")
        _write(p, config.to_json())
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = SyntheticSpec()
    if args.spec:
        p = Path(args.spec)
        if not p.is_file():
            raise CliError(EXIT_MISSING, f"spec file not found: {p}")
        try:
            spec = SyntheticSpec.from_dict(json.loads(p.read_text()))
        except (json.JSONDecodeError, TypeError, ValueError) as exc:
            raise CliError(EXIT_CONFIG, f"malformed synthetic spec: {exc}") from None
    changes = {k: v for k, v in (("seed", args.seed), ("n_transformers", args.transformers), ("days", args.days),
                                 ("noise_level", args.noise), ("solar_fraction", args.solar)) if v is not None}
    try:
        spec = dataclasses.replace(spec, **changes)
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, f"malformed synthetic spec: {exc}") from None
    out = Path(os.environ.get(OUTPUT_ENV) or args.out)
    dataset = generate_synthetic(spec)
    try:
        paths = dataset.write_csv(out)
        (out / "synth_spec.json").write_text(json.dumps(spec.to_dict(), indent=2) + "\n")
    except OSError as exc:
        raise CliError(EXIT_OUTPUT, str(exc)) from None
    for p in paths.values():
        logger.info("wrote %s", p)
    return EXIT_OK


def _prepare(args):
    config, base = load_config(args.config)
    try:
        config = _override(config, args)
    except ConfigurationError as exc:
        raise CliError(EXIT_CONFIG, f"malformed config: {exc}") from None
    return config, base, load_dataset(config, base)


def cmd_run(args) -> int:
    config, base, dataset = _prepare(args)
    out = output_dir(config, base)
    report = run_horizon(config.sim_config(), dataset)
    _write(out / "report.csv", report.report_csv())
    _write(out / "summary.json", report.summary_json() + "\n")
    _write(out / "config.json", config.to_json())
    total = sum(s.violations for s in report.summaries.values())
    for label, s in report.summaries.items():
        print(f"{label:>15s}  savings {s.savings_kg:14.3f} kg  {s.savings_pct:7.3f} %  violations {s.violations}")
    if total:
        print(f"error: {total} constraint violation(s) in realized schedules", file=sys.stderr)
        return EXIT_VIOLATIONS
    return EXIT_OK


def _parse_values(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise CliError(EXIT_CONFIG, f"sweep values must be comma-separated numbers, got {text!r}") from None


def cmd_sweep(args) -> int:
    if args.axis not in SWEEP_AXES:
        raise CliError(EXIT_CONFIG, f"invalid sweep axis {args.axis!r}; choose from {', '.join(SWEEP_AXES)}")
    values = _parse_values(args.values)
    config, base, dataset = _prepare(args)
    out = output_dir(config, base)
    try:
        rows = sweep(config.sim_config(), dataset, args.axis, values)
    except ValueError as exc:
        if isinstance(exc, InsufficientHistoryError):
            raise
        raise CliError(EXIT_CONFIG, str(exc)) from None
    _write(out / f"sweep_{args.axis}.csv", sweep_csv(rows))
    detail = [dataclasses.asdict(r) for r in rows]
    _write(out / f"sweep_{args.axis}.json", json.dumps(detail, indent=2) + "\n")
    sys.stdout.write(sweep_csv(rows))
    return EXIT_OK


def cmd_forecast_eval(args) -> int:
    config, base, dataset = _prepare(args)
    out = output_dir(config, base)
    sim = config.sim_config()
    last = None if config.eval_days is None else config.warmup_days + config.eval_days
    bundle = forecast_horizon(dataset, config.warmup_days, sim.forecast, last)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["transformer_id", "mape_model", "mape_persistence"])
    for tid, m, p in zip(dataset.transformer_ids, bundle.mape, bundle.persistence_mape):
        w.writerow([tid, f"{m:.6f}", f"{p:.6f}"])
    _write(out / "forecast_mape.csv", buf.getvalue())
    print(f"mean MAPE  model {np.nanmean(bundle.mape):.3f} %  persistence {np.nanmean(bundle.persistence_mape):.3f} %")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="run configuration JSON (defaults apply when omitted)")
    p.add_argument("--output-dir", help=f"output directory (the {OUTPUT_ENV} variable takes precedence)")
    p.add_argument("--policies", help="comma-separated policy names")
    p.add_argument("--gamma", type=float, help="budget of uncertainty for RobustRO")
    p.add_argument("--battery-hours", type=float)
    p.add_argument("--rate-hours", type=float)
    p.add_argument("--penetration", type=float)
    p.add_argument("--eta-fraction", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--warmup-days", type=int)
    p.add_argument("--eval-days", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eass", description="Emission-aware scheduling of grid storage.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="write a config with every default spelled out")
    p.add_argument("output", nargs="?", default="config.json", help="target file, or - for stdout")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("synth", help="generate a seeded synthetic dataset")
    p.add_argument("--out", default="data")
    p.add_argument("--spec", help="SyntheticSpec JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--transformers", type=int)
    p.add_argument("--days", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--solar", type=float)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("run", help="simulate every policy over the horizon")
    _run_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="repeat the run along one parameter axis")
    _run_flags(p)
    p.add_argument("--axis", required=True, help=" | ".join(SWEEP_AXES))
    p.add_argument("--values", required=True, help="comma-separated values")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("forecast-eval", help="per-transformer MAPE of the forecaster and of persistence")
    _run_flags(p)
    p.set_defaults(func=cmd_forecast_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ConfigurationError as exc:
        print(f"error: malformed config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InsufficientHistoryError as exc:
        print(f"error: insufficient warm-up: {exc}", file=sys.stderr)
        return EXIT_WARMUP


if __name__ == "__main__":
    sys.exit(main())
