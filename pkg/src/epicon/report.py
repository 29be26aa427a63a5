"""Serialization of aggregates, confusion matrices, and mode deltas.

Tables round to 3 decimals (matching how the metrics are normally quoted);
the JSON files carry full precision. No charts are rendered anywhere: the
emitted files are the plot-ready data.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

from .errors import DigestMismatch, IoFailure, NothingScored
from .pipeline import AggregateReport, ConfusionMatrix, MetricStat

METRIC_COLUMNS = ("tau_supporters", "tau_defeaters", "tau_all", "cgp", "igc")

FORMATS = ("csv", "json", "markdown")


def _cell(stat: MetricStat) -> str:
    if stat.count == 0 or math.isnan(stat.mean):
        return "n/a"
    return f"{stat.mean:.3f} ± {stat.std:.3f}"


def _check_report(report: AggregateReport) -> None:
    if not report.metrics or report.scored == 0:
        raise NothingScored("aggregate report holds no scored pairs")


def emit_aggregate(report: AggregateReport, fmt: str, path: str | Path) -> Path:
    """Write one aggregate report as csv, json, or markdown."""
    _check_report(report)
    if fmt not in FORMATS:
        raise IoFailure(f"unknown format {fmt!r}; expected one of {FORMATS}")
    path = Path(path)
    model = str(report.metadata.get("model", "unknown"))
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if fmt == "csv":
            with path.open("w", encoding="utf-8", newline="") as handle:
                writer = csv.writer(handle)
                writer.writerow(["model", *METRIC_COLUMNS, "scored", "failed"])
                writer.writerow(
                    [model]
                    + [_cell(report.metrics[name]) for name in METRIC_COLUMNS]
                    + [report.scored, report.failed]
                )
        elif fmt == "json":
            payload = {
                "metrics": {
                    name: {
                        "mean": None if stat.count == 0 else stat.mean,
                        "std": None if stat.count == 0 else stat.std,
                        "count": stat.count,
                    }
                    for name, stat in report.metrics.items()
                },
                "failures": report.failures,
                "metadata": report.metadata,
            }
            path.write_text(
                json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2) + "\n",
                encoding="utf-8",
            )
        else:
            header = "| model | " + " | ".join(METRIC_COLUMNS) + " | scored | failed |"
            divider = "|" + "---|" * (len(METRIC_COLUMNS) + 3)
            row = (
                f"| {model} | "
                + " | ".join(_cell(report.metrics[name]) for name in METRIC_COLUMNS)
                + f" | {report.scored} | {report.failed} |"
            )
            path.write_text("\n".join([header, divider, row]) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path


def parse_aggregate_csv(path: str | Path) -> dict[str, tuple[float, float]]:
    """Read back the mean/std cells of an emitted aggregate CSV."""
    with Path(path).open("r", encoding="utf-8", newline="") as handle:
        rows = list(csv.reader(handle))
    header, values = rows[0], rows[1]
    out: dict[str, tuple[float, float]] = {}
    for name, cell in zip(header[1:], values[1:]):
        if name in METRIC_COLUMNS and cell != "n/a":
            mean_text, std_text = cell.split("±")
            out[name] = (float(mean_text), float(std_text))
    return out


def load_aggregate_json(path: str | Path) -> AggregateReport:
    """Rebuild an :class:`AggregateReport` from an emitted JSON file."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    metrics = {
        name: MetricStat(
            mean=math.nan if entry["mean"] is None else float(entry["mean"]),
            std=math.nan if entry["std"] is None else float(entry["std"]),
            count=int(entry["count"]),
        )
        for name, entry in payload["metrics"].items()
    }
    return AggregateReport(
        metrics=metrics,
        failures={k: int(v) for k, v in payload["failures"].items()},
        metadata=payload["metadata"],
    )


def emit_confusion(matrix: ConfusionMatrix, path: str | Path) -> Path:
    """Write the confusion matrix as a CSV of row-normalized percentages.

    Rows and columns are labeled with the intensity slots; a trailing
    ``row_sum`` column makes the 100.0 normalization visible.
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["slot", *matrix.labels, "row_sum"])
            for label, row in zip(matrix.labels, matrix.percentages):
                writer.writerow(
                    [label] + [f"{cell:.1f}" for cell in row] + [f"{sum(row):.1f}"]
                )
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path


DELTA_METRICS = ("tau_all", "cgp", "igc")


def emit_delta(
    prompt_report: AggregateReport,
    prob_reports: dict[str, AggregateReport],
    path: str | Path,
) -> Path:
    """Write per-conjunction differences: probability mean minus prompt mean.

    All inputs must come from the same model and dataset snapshot.
    """
    _check_report(prompt_report)
    reference = (
        prompt_report.metadata.get("model"),
        prompt_report.metadata.get("dataset_digest"),
    )
    if reference[0] is None or reference[1] is None:
        raise DigestMismatch("prompt report lacks model/dataset metadata")
    for conjunction, report in prob_reports.items():
        _check_report(report)
        candidate = (report.metadata.get("model"), report.metadata.get("dataset_digest"))
        if candidate != reference:
            raise DigestMismatch(
                f"report for conjunction {conjunction!r} is from {candidate}, "
                f"prompt report from {reference}"
            )
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["conjunction"] + [f"delta_{name}" for name in DELTA_METRICS])
            for conjunction in sorted(prob_reports):
                report = prob_reports[conjunction]
                deltas = [
                    report.metrics[name].mean - prompt_report.metrics[name].mean
                    for name in DELTA_METRICS
                ]
                writer.writerow([conjunction] + [f"{d:+.3f}" for d in deltas])
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path
