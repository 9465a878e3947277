"""Figure renderers for the simulation results CSV.

Every family reads the long-format results table (one row per simulated grid
point) and produces one deterministic image: fixed scheme colors, fixed
ordering, no timestamps in the output file.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

#: fixed scheme -> color mapping so re-renders are identical
POLICY_COLORS = {
    "maf": "#1f77b4",
    "fsa": "#ff7f0e",
    "afsa": "#2ca02c",
    "pps": "#d62728",
    "cra": "#9467bd",
    "rsm": "#8c564b",
    "ssm": "#e377c2",
    "none": "#7f7f7f",
}
FALLBACK_COLORS = ("#17becf", "#bcbd22", "#aec7e8", "#ffbb78", "#98df94")

FAMILIES = (
    "pull_vs_Q",
    "pull_vs_rate",
    "push_vs_rate",
    "push_vs_P",
    "coexistence_vs_P",
    "constrained_best",
)

REQUIRED_COLUMNS = {
    "pull_vs_Q": ("pull_policy", "scenario", "Q", "psi_avg_ms"),
    "pull_vs_rate": ("pull_policy", "rho_d_hz", "psi_avg_ms"),
    "push_vs_rate": ("push_policy", "rho_a_hz", "theta_avg_ms"),
    "push_vs_P": ("push_policy", "P", "theta_avg_ms"),
    "coexistence_vs_P": ("P", "psi_avg_ms", "theta_avg_ms"),
    "constrained_best": ("pull_policy", "push_policy", "alloc"),
}

METRIC_LABELS = {
    "psi_avg_ms": "mean drift AoII (ms)",
    "psi_p99_ms": "99th pct drift AoII (ms)",
    "theta_avg_ms": "mean anomaly AoII (ms)",
    "theta_p99_ms": "99th pct anomaly AoII (ms)",
    "collision_rate": "collision rate",
}


class RenderError(Exception):
    """Raised when the CSV cannot support the requested figure."""


@dataclass
class Constraint:
    metric: str
    bound: float

    @classmethod
    def parse(cls, text: str) -> "Constraint":
        if "<=" not in text:
            raise RenderError(f"constraint must look like metric<=value, got {text!r}")
        metric, _, value = text.partition("<=")
        try:
            return cls(metric.strip(), float(value))
        except ValueError as err:
            raise RenderError(f"constraint bound is not a number: {value!r}") from err


@dataclass
class FigureSpec:
    family: str
    input_csv: str
    output_path: str
    objective: str = "psi_avg_ms"
    constraint: Constraint = field(
        default_factory=lambda: Constraint("theta_p99_ms", 30.0)
    )

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise RenderError(
                f"unknown figure family {self.family!r}; choose from {', '.join(FAMILIES)}"
            )


def load_rows(spec: FigureSpec) -> list[dict]:
    path = Path(spec.input_csv)
    if not path.exists():
        raise RenderError(f"input CSV not found: {path}")
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        required = set(REQUIRED_COLUMNS[spec.family])
        if spec.family == "constrained_best":
            required |= {spec.objective, spec.constraint.metric}
        missing = sorted(required - set(header))
        if missing:
            raise RenderError(f"CSV is missing required columns: {', '.join(missing)}")
        rows = list(reader)
    if not rows:
        raise RenderError("CSV has no data rows")
    return rows


def _num(row: dict, column: str) -> float:
    value = row[column]
    try:
        return float(value)
    except ValueError:
        return float("nan")


def _color(key: str, index: int) -> str:
    return POLICY_COLORS.get(key, FALLBACK_COLORS[index % len(FALLBACK_COLORS)])


def _grouped_bars(ax, rows, x_col, series_of, y_col):
    """Bars grouped by the x column, one bar per series within each group."""
    xs = sorted({int(float(r[x_col])) for r in rows})
    series = sorted({series_of(r) for r in rows})
    width = 0.8 / max(len(series), 1)
    for j, name in enumerate(series):
        values = []
        for x in xs:
            match = [
                _num(r, y_col)
                for r in rows
                if int(float(r[x_col])) == x and series_of(r) == name
            ]
            values.append(sum(match) / len(match) if match else 0.0)
        offsets = [i + (j - (len(series) - 1) / 2) * width for i in range(len(xs))]
        ax.bar(offsets, values, width=width, label=name,
               color=_color(name.split("/")[0], j))
    ax.set_xticks(range(len(xs)))
    ax.set_xticklabels([str(x) for x in xs])
    ax.legend(fontsize=8)


def _lines(ax, rows, x_col, series_col, y_col):
    series = sorted({r[series_col] for r in rows})
    for j, name in enumerate(series):
        points = sorted(
            (
                (_num(r, x_col), _num(r, y_col))
                for r in rows
                if r[series_col] == name
            ),
        )
        ax.plot(
            [p[0] for p in points],
            [p[1] for p in points],
            marker="o",
            label=name,
            color=_color(name, j),
        )
    ax.legend(fontsize=8)


def scheme_label(row: dict) -> str:
    if row["alloc"] in ("rsm", "ssm"):
        return row["alloc"]
    return f"{row['pull_policy']}-{row['push_policy']}"


def _constrained_best(ax, rows, constraint: Constraint, objective: str):
    best: dict[str, float] = {}
    order: list[str] = []
    for row in rows:
        label = scheme_label(row)
        if label not in best:
            best[label] = float("inf")
            order.append(label)
        bound_value = _num(row, constraint.metric)
        value = _num(row, objective)
        if bound_value <= constraint.bound and value < best[label]:
            best[label] = value
    feasible_max = max((v for v in best.values() if v != float("inf")), default=1.0)
    for i, label in enumerate(order):
        value = best[label]
        if value == float("inf"):
            # the paper-style marker for schemes with no admissible row
            ax.text(i, feasible_max * 0.5, "x", color="red", ha="center",
                    va="center", fontsize=14, fontweight="bold")
        else:
            ax.bar([i], [value], width=0.6, color=_color(label.split("-")[0], i))
    ax.set_xticks(range(len(order)))
    ax.set_xticklabels(order, rotation=40, ha="right", fontsize=8)
    ax.set_title(
        f"min {objective} s.t. {constraint.metric} <= {constraint.bound:g}",
        fontsize=9,
    )


def build_figure(spec: FigureSpec, rows: list[dict]):
    fig, ax = plt.subplots(figsize=(6.4, 3.6), dpi=150)
    family = spec.family
    if family == "pull_vs_Q":
        _grouped_bars(
            ax, rows, "Q", lambda r: f"{r['pull_policy']}/{r['scenario']}", "psi_avg_ms"
        )
        ax.set_xlabel("pull slots Q (REs)")
        ax.set_ylabel(METRIC_LABELS["psi_avg_ms"])
    elif family == "pull_vs_rate":
        _lines(ax, rows, "rho_d_hz", "pull_policy", "psi_avg_ms")
        ax.set_xlabel("drift rate (Hz)")
        ax.set_ylabel(METRIC_LABELS["psi_avg_ms"])
    elif family == "push_vs_rate":
        _lines(ax, rows, "rho_a_hz", "push_policy", "theta_avg_ms")
        ax.set_xlabel("anomaly rate (Hz)")
        ax.set_ylabel(METRIC_LABELS["theta_avg_ms"])
    elif family == "push_vs_P":
        _grouped_bars(ax, rows, "P", lambda r: r["push_policy"], "theta_avg_ms")
        ax.set_xlabel("push slots P (REs)")
        ax.set_ylabel(METRIC_LABELS["theta_avg_ms"])
    elif family == "coexistence_vs_P":
        xs = sorted({int(float(r["P"])) for r in rows})
        width = 0.35
        for j, metric in enumerate(("psi_avg_ms", "theta_avg_ms")):
            values = []
            for x in xs:
                match = [_num(r, metric) for r in rows if int(float(r["P"])) == x]
                values.append(sum(match) / len(match) if match else 0.0)
            offsets = [i + (j - 0.5) * width for i in range(len(xs))]
            ax.bar(offsets, values, width=width, label=METRIC_LABELS[metric],
                   color=("#1f77b4", "#ff7f0e")[j])
        ax.set_xticks(range(len(xs)))
        ax.set_xticklabels([str(x) for x in xs])
        ax.set_xlabel("push slots P (REs)")
        ax.set_ylabel("mean AoII (ms)")
        ax.legend(fontsize=8)
    else:
        _constrained_best(ax, rows, spec.constraint, spec.objective)
        ax.set_ylabel(METRIC_LABELS.get(spec.objective, spec.objective))
    fig.tight_layout()
    return fig


def render(spec: FigureSpec) -> str:
    """Renders one figure family to disk and returns the output path."""
    rows = load_rows(spec)
    fig = build_figure(spec, rows)
    try:
        fig.savefig(spec.output_path, format="png", metadata={"Software": "aoiiplots"})
    finally:
        plt.close(fig)
    return spec.output_path
