"""Experiment driver: config parsing, parameter sweeps, constrained optima.

`pps simulate` expands a JSON config into a grid of runs and writes one CSV
row per grid point; `pps best` selects, per scheme, the row that minimizes an
objective subject to a metric bound, mirroring the constrained comparisons.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields

from .engine import SimConfig, run_monte_carlo

__all__ = [
    "ExperimentSpec",
    "ConfigError",
    "parse_config",
    "expand_grid",
    "run_sweep",
    "constrained_best",
    "main",
    "CSV_COLUMNS",
]

EXIT_CONFIG_ERROR = 2
EXIT_SIM_ERROR = 3

CSV_COLUMNS = [
    "pull_policy",
    "push_policy",
    "alloc",
    "Q",
    "P",
    "rho_d_hz",
    "rho_a_hz",
    "scenario",
    "psi_avg_ms",
    "psi_p99_ms",
    "theta_avg_ms",
    "theta_p99_ms",
    "mean_push_res",
    "collision_rate",
    "episodes",
    "seed",
]

METRIC_COLUMNS = ("psi_avg_ms", "psi_p99_ms", "theta_avg_ms", "theta_p99_ms")

_CONFIG_KEYS = {f.name for f in fields(SimConfig)}


class ConfigError(ValueError):
    """Invalid or unreadable experiment configuration."""


@dataclass
class Constraint:
    metric: str
    bound: float
    objective: str

    def __post_init__(self) -> None:
        for name in (self.metric, self.objective):
            if name not in METRIC_COLUMNS:
                raise ConfigError(f"unknown metric {name!r}; choose from {METRIC_COLUMNS}")


@dataclass
class ExperimentSpec:
    base: SimConfig
    sweep: dict[str, list] = field(default_factory=dict)
    constraint: Constraint | None = None

    def to_dict(self) -> dict:
        out = dict(self.base.to_dict())
        if self.sweep:
            out["sweep"] = {k: list(v) for k, v in self.sweep.items()}
        if self.constraint is not None:
            out["constraint"] = {
                "metric": self.constraint.metric,
                "bound": self.constraint.bound,
                "objective": self.constraint.objective,
            }
        return out


def parse_config(path: str) -> ExperimentSpec:
    """Load and validate an experiment spec; defaults fill unset fields."""
    try:
        with open(path) as handle:
            raw = json.load(handle)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as err:
        raise ConfigError(f"config file is not valid JSON: {err}")
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    return spec_from_dict(raw)


def spec_from_dict(raw: dict) -> ExperimentSpec:
    raw = dict(raw)
    sweep = raw.pop("sweep", {})
    constraint_raw = raw.pop("constraint", None)
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        base = SimConfig(**raw)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"invalid config value: {err}")
    if not isinstance(sweep, dict):
        raise ConfigError("'sweep' must map config keys to value lists")
    for key, values in sweep.items():
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"sweep axis {key!r} is not a config key")
        if not isinstance(values, list) or not values:
            raise ConfigError(f"sweep axis {key!r} needs a non-empty value list")
    constraint = None
    if constraint_raw is not None:
        try:
            constraint = Constraint(**constraint_raw)
        except TypeError as err:
            raise ConfigError(f"invalid constraint: {err}")
    return ExperimentSpec(base=base, sweep=dict(sweep), constraint=constraint)


def expand_grid(spec: ExperimentSpec) -> list[SimConfig]:
    """Cartesian product of the sweep axes over the base config, in axis order."""
    configs = [spec.base.to_dict()]
    for key, values in spec.sweep.items():
        configs = [dict(cfg, **{key: v}) for cfg in configs for v in values]
    return [SimConfig(**cfg) for cfg in configs]


def _format(value) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _run_point(config: SimConfig) -> dict:
    summary = run_monte_carlo(config)
    return {
        "pull_policy": config.pull_policy,
        "push_policy": config.push_policy,
        "alloc": config.alloc,
        "Q": config.total_res - config.push_res,
        "P": config.push_res,
        "rho_d_hz": config.rho_d_hz,
        "rho_a_hz": config.rho_a_hz,
        "scenario": config.scenario,
        "psi_avg_ms": summary["psi_avg_ms"],
        "psi_p99_ms": summary["psi_p99_ms"],
        "theta_avg_ms": summary["theta_avg_ms"],
        "theta_p99_ms": summary["theta_p99_ms"],
        "mean_push_res": summary["mean_push_res"],
        "collision_rate": summary["collision_rate"],
        "episodes": config.episodes,
        "seed": config.seed,
    }


def run_sweep(
    spec: ExperimentSpec, out_path: str | None = None, workers: int = 1
) -> tuple[list[dict], list[str]]:
    """Run every grid point; returns (rows, per-point error messages).

    Failed points are reported and skipped, the rest of the grid still runs.
    Rows are written in grid order regardless of worker scheduling.
    """
    configs = expand_grid(spec)
    errors: list[str] = []
    rows: list[dict | None] = [None] * len(configs)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {i: pool.submit(_run_point, cfg) for i, cfg in enumerate(configs)}
            for i, future in futures.items():
                try:
                    rows[i] = future.result()
                except Exception as err:  # noqa: BLE001 - collect per-row failures
                    errors.append(f"grid point {i}: {err}")
    else:
        for i, cfg in enumerate(configs):
            try:
                rows[i] = _run_point(cfg)
            except Exception as err:  # noqa: BLE001
                errors.append(f"grid point {i}: {err}")
    done = [row for row in rows if row is not None]
    if out_path is not None:
        write_rows(done, out_path)
    return done, errors


def write_rows(rows: list[dict], path: str) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_format(row[col]) for col in CSV_COLUMNS])


def read_rows(path: str) -> list[dict]:
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        rows = []
        for raw in reader:
            row = dict(raw)
            for col in METRIC_COLUMNS + ("mean_push_res", "collision_rate", "rho_d_hz", "rho_a_hz"):
                if col in row:
                    row[col] = float(row[col])
            for col in ("Q", "P", "episodes", "seed"):
                if col in row:
                    row[col] = int(row[col])
            rows.append(row)
        return rows


def constrained_best(rows: list[dict], constraint: Constraint) -> list[dict]:
    """Per scheme, the feasible row minimizing the objective, or an
    explicit infeasible marker when no row meets the bound."""
    schemes: dict[tuple, list[dict]] = {}
    for row in rows:
        key = (row["pull_policy"], row["push_policy"], row["alloc"])
        schemes.setdefault(key, []).append(row)
    out = []
    for key, group in schemes.items():
        feasible = [
            r
            for r in group
            if r[constraint.metric] == r[constraint.metric]  # drop NaN
            and r[constraint.metric] <= constraint.bound
        ]
        if not feasible:
            out.append(
                {
                    "pull_policy": key[0],
                    "push_policy": key[1],
                    "alloc": key[2],
                    "feasible": False,
                }
            )
            continue
        best = min(feasible, key=lambda r: r[constraint.objective])
        out.append(dict(best, feasible=True))
    return out


def _parse_constraint_arg(text: str) -> tuple[str, float]:
    if "<=" not in text:
        raise ConfigError("constraint must look like metric<=value")
    metric, _, bound = text.partition("<=")
    metric = metric.strip()
    if metric not in METRIC_COLUMNS:
        raise ConfigError(f"unknown metric {metric!r}; choose from {METRIC_COLUMNS}")
    try:
        return metric, float(bound)
    except ValueError:
        raise ConfigError(f"constraint bound {bound!r} is not a number")


def _cmd_simulate(args: argparse.Namespace) -> int:
    try:
        spec = parse_config(args.config)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    if args.seed is not None:
        spec.base.seed = args.seed
    workers = args.workers or int(os.environ.get("PPS_WORKERS", "1"))
    rows, errors = run_sweep(spec, out_path=args.out, workers=workers)
    for message in errors:
        print(f"simulation error: {message}", file=sys.stderr)
    if args.frame_log is not None:
        from .engine import run_episode

        ledger = run_episode(spec.base, spec.base.seed, keep_frame_logs=True)
        with open(args.frame_log, "w") as handle:
            for log in ledger.frame_logs:
                handle.write(json.dumps(log.__dict__) + "\n")
    print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_SIM_ERROR if errors else 0


def _cmd_best(args: argparse.Namespace) -> int:
    try:
        metric, bound = _parse_constraint_arg(args.constraint)
        if args.objective not in METRIC_COLUMNS:
            raise ConfigError(
                f"unknown objective {args.objective!r}; choose from {METRIC_COLUMNS}"
            )
        constraint = Constraint(metric=metric, bound=bound, objective=args.objective)
        rows = read_rows(args.infile)
    except (ConfigError, OSError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    results = constrained_best(rows, constraint)
    writer = csv.writer(sys.stdout)
    writer.writerow(["pull_policy", "push_policy", "alloc", "P", args.objective])
    for row in results:
        if row["feasible"]:
            writer.writerow(
                [
                    row["pull_policy"],
                    row["push_policy"],
                    row["alloc"],
                    row["P"],
                    _format(row[args.objective]),
                ]
            )
        else:
            writer.writerow(
                [row["pull_policy"], row["push_policy"], row["alloc"], "", "infeasible"]
            )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pps", description="push-pull access framework simulator"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a config, optionally over a sweep grid")
    sim.add_argument("--config", required=True, help="JSON experiment config")
    sim.add_argument("--seed", type=int, default=None, help="override the master seed")
    sim.add_argument("--out", default="results.csv", help="output CSV path")
    sim.add_argument("--frame-log", default=None, help="write per-frame logs (JSONL)")
    sim.add_argument(
        "--workers", type=int, default=None,
        help="parallel grid workers (default: PPS_WORKERS or 1)",
    )
    sim.set_defaults(func=_cmd_simulate)

    best = sub.add_parser("best", help="constrained best row per scheme")
    best.add_argument("--in", dest="infile", required=True, help="results CSV")
    best.add_argument("--constraint", required=True, help="metric<=value")
    best.add_argument("--objective", required=True, help="metric to minimize")
    best.set_defaults(func=_cmd_best)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
