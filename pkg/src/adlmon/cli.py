"""Command-line front end: generate a scenario, run the monitors, report.

    adlmon generate --config cfg.json --out runs/a
    adlmon run --out runs/a --mode both
    adlmon report --out runs/a

Run directory layout:

    config.json           resolved configuration
    scenario.csv          event trace
    ground_truth.csv      injected anomalies
    adaptive/ continuous/ detections.csv, assessments.csv, ledger.csv,
                          ledger_activities.csv
    report.json           comparison report (mode both)
    comparison.csv        per-activity savings (mode both)
    series/               figure data written by `report`

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

from .catalog import DAY_S, CatalogError, load_catalog
from .engine import (
    EngineConfig,
    EngineError,
    RunResult,
    load_history_flags,
    read_detections,
    run,
    run_continuous,
    write_assessments,
    write_detections,
)
from .evaluation import EvaluationError, build_report, comparison_csv, emit_series
from .generator import (
    DECLINE_SCHEDULE,
    GenerationError,
    ScheduleError,
    _clip,
    generate_year,
    load_scenario_model,
)
from .resources import ResourceError, ResourceLedger, load_sensor_params, read_activities_csv
from .scenario import (
    AnomalyError,
    AnomalySpec,
    ScenarioFormatError,
    _atomic_write,
    read_ground_truth,
    read_scenario,
    write_ground_truth,
    write_scenario,
)

CONFIG_ENV = "ADLMON_CONFIG"
MODES = ("adaptive", "continuous", "both")
EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2

RUNTIME_ERRORS = (
    OSError, ValueError, KeyError, CatalogError, EngineError, EvaluationError, GenerationError,
    ScheduleError, ResourceError, AnomalyError, ScenarioFormatError,
)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    seed: int = 42
    horizon_s: int = 365 * DAY_S
    catalog: str | None = None  # None: packaged default
    matrices: str | None = None  # scenario model (matrices + behaviour)
    sensors: str | None = None
    history_flags: str | None = None
    schedule: list[list[int]] = field(default_factory=lambda: [list(s) for s in DECLINE_SCHEDULE])
    anomalies: str | list[dict] | None = "auto"  # "auto", None or explicit specs
    out: str = "run"

    def __post_init__(self):
        if not isinstance(self.horizon_s, int) or self.horizon_s <= 0:
            raise ConfigError("horizon_s must be a positive integer")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        if not (self.anomalies in ("auto", None) or isinstance(self.anomalies, list)):
            raise ConfigError('anomalies must be "auto", null or a list of specs')

    def check_paths(self) -> None:
        for name in ("catalog", "matrices", "sensors", "history_flags"):
            p = getattr(self, name)
            if p is not None and not Path(p).is_file():
                raise ConfigError(f"{name} path not found: {p}")

    def anomaly_specs(self) -> str | list[AnomalySpec] | None:
        if isinstance(self.anomalies, list):
            return [AnomalySpec(int(a["day"]), a["activity_id"], a["kind"]) for a in self.anomalies]
        return self.anomalies

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1, sort_keys=True) + "\n"


def load_config(path: str | Path | None) -> RunConfig:
    """Read a JSON config; relative paths are taken from the config's directory."""
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: parse error: {e}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    unknown = set(raw) - set(RunConfig.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    for key in ("catalog", "matrices", "sensors", "history_flags"):
        if raw.get(key) is not None:
            raw[key] = str((path.parent / raw[key]).resolve())
    return RunConfig(**raw)


# --- commands ------------------------------------------------------------------

def cmd_generate(cfg: RunConfig, out: Path) -> list[Path]:
    cfg.check_paths()
    catalog = load_catalog(cfg.catalog)
    model = load_scenario_model(cfg.matrices)
    days = -(-cfg.horizon_s // DAY_S)
    schedule = [tuple(s) for s in cfg.schedule]
    events, truth = generate_year(model, catalog, schedule, cfg.seed, cfg.anomaly_specs(), days)
    events = _clip(events, cfg.horizon_s)
    truth = [g for g in truth if g.t_s < cfg.horizon_s]
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "config.json", out / "scenario.csv", out / "ground_truth.csv"]
    _atomic_write(paths[0], cfg.to_json())
    write_scenario(events, paths[1])
    write_ground_truth(truth, paths[2])
    return paths


def _write_run(result: RunResult, catalog, outdir: Path) -> None:
    write_detections(result.detections, outdir / "detections.csv")
    if result.assessments:
        write_assessments(result.assessments, catalog, outdir / "assessments.csv")
    _atomic_write(outdir / "ledger.csv", result.ledger.to_csv())
    _atomic_write(outdir / "ledger_activities.csv", result.ledger.activities_csv())


def cmd_run(cfg: RunConfig, out: Path, mode: str) -> dict:
    cfg.check_paths()
    if not (out / "scenario.csv").is_file():
        cmd_generate(cfg, out)
    catalog = load_catalog(cfg.catalog)
    params = load_sensor_params(cfg.sensors)
    events = read_scenario(out / "scenario.csv")
    flags = load_history_flags(cfg.history_flags) if cfg.history_flags else ()
    results = {}
    if mode in ("adaptive", "both"):
        ecfg = EngineConfig(horizon_s=cfg.horizon_s, history_flags=flags)
        results["adaptive"] = run(events, catalog, cfg.horizon_s, params, ecfg)
    if mode in ("continuous", "both"):
        results["continuous"] = run_continuous(events, catalog, cfg.horizon_s, params)
    for name, res in results.items():
        _write_run(res, catalog, out / name)
    if mode != "both":
        return {}
    truth = read_ground_truth(out / "ground_truth.csv")
    report = build_report(results["adaptive"], results["continuous"], truth)
    _atomic_write(out / "report.json", report.to_json())
    _atomic_write(out / "comparison.csv", comparison_csv(report))
    return report.summary()


def _load_run(outdir: Path, catalog, mode: str) -> RunResult:
    ledger: ResourceLedger = read_activities_csv(
        (outdir / "ledger_activities.csv").read_text(encoding="utf-8"), catalog)
    return RunResult(read_detections(outdir / "detections.csv"), [], ledger, mode)


def cmd_report(cfg: RunConfig, out: Path) -> list[Path]:
    """Rebuild the report from a completed run directory and emit the series."""
    needed = [out / "ground_truth.csv", out / "adaptive" / "ledger_activities.csv",
              out / "continuous" / "ledger_activities.csv"]
    missing = [str(p) for p in needed if not p.is_file()]
    if missing:
        raise ConfigError(f"not a completed run directory (missing {missing[0]})")
    catalog = load_catalog(cfg.catalog)
    adaptive = _load_run(out / "adaptive", catalog, "adaptive")
    continuous = _load_run(out / "continuous", catalog, "continuous")
    report = build_report(adaptive, continuous, read_ground_truth(out / "ground_truth.csv"))
    return emit_series(report, out / "series")


# --- argument handling ---------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help=f"JSON run config (default: ${CONFIG_ENV} or built-in)")
    common.add_argument("--out", help="run directory (default: the config's out)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--quiet", action="store_true", help="print nothing on success")
    ap = _Parser(prog="adlmon", description="Adaptive ADL monitoring simulator")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("generate", parents=[common], help="write scenario and ground truth")
    p = sub.add_parser("run", parents=[common], help="run the monitors over the scenario")
    p.add_argument("--mode", choices=MODES, default="both")
    sub.add_parser("report", parents=[common], help="emit figure data from a run directory")
    return ap


def _resolve(args) -> tuple[RunConfig, Path]:
    cfg = load_config(args.config or os.environ.get(CONFIG_ENV) or None)
    if args.seed is not None:
        cfg = RunConfig(**{**asdict(cfg), "seed": args.seed})
    out = Path(args.out if args.out else cfg.out)
    return cfg, out


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    say = (lambda *a: None) if args.quiet else print
    try:
        cfg, out = _resolve(args)
        if args.command == "generate":
            for p in cmd_generate(cfg, out):
                say(p)
        elif args.command == "run":
            summary = cmd_run(cfg, out, args.mode)
            say(json.dumps(summary, sort_keys=True) if summary else f"wrote {out}")
        else:
            for p in cmd_report(cfg, out):
                say(p)
    except RUNTIME_ERRORS as e:
        msg = str(e).splitlines()[0] if str(e) else type(e).__name__
        print(f"adlmon: error: {msg}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
