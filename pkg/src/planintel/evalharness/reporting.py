"""Comparison report writers: delimited table, structured JSON, and a chart."""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .comparison import ComparisonReport, MetricReport

TABLE_NAME = "comparison.csv"
REPORT_NAME = "comparison.json"
FIGURE_NAME = "comparison.png"


def format_metric(value: float | None) -> str:
    return "n/a" if value is None else f"{value:.4f}"


def write_table(report: ComparisonReport, path: Path) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["section", "metric", "baseline", "proposed"])
        for row in report.rows:
            writer.writerow(
                [row.section, row.metric, format_metric(row.baseline), format_metric(row.proposed)]
            )


def _metric_report_payload(arm: MetricReport) -> dict:
    return {
        "ner_f1": {
            field: {
                "precision": score.precision,
                "recall": score.recall,
                "f1": score.f1,
                "undefined": score.undefined,
            }
            for field, score in arm.ner_f1.items()
        },
        "pii_recall": {
            "per_category": dict(arm.pii_recall.per_category),
            "micro": arm.pii_recall.micro,
            "macro": arm.pii_recall.macro,
            "pooled_tp": arm.pii_recall.pooled_tp,
            "pooled_total": arm.pii_recall.pooled_total,
        },
        "detection_map": {
            label: {"ap": result.ap, "excluded": result.excluded}
            for label, result in arm.detection_map.items()
        },
        "mean_ap": arm.mean_ap,
    }


def report_payload(report: ComparisonReport, manifest: dict | None = None) -> dict:
    payload = {
        "n_docs": report.n_docs,
        "total_cost_micro": report.total_cost_micro,
        "rows": [
            {
                "section": row.section,
                "metric": row.metric,
                "baseline": row.baseline,
                "proposed": row.proposed,
            }
            for row in report.rows
        ],
        "baseline": _metric_report_payload(report.baseline),
        "proposed": _metric_report_payload(report.proposed),
    }
    if manifest:
        payload["run"] = dict(manifest)
    return payload


def write_figure(report: ComparisonReport, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    labels = [f"{row.section}\n{row.metric}" for row in report.rows]
    baseline = [row.baseline if row.baseline is not None else 0.0 for row in report.rows]
    proposed = [row.proposed if row.proposed is not None else 0.0 for row in report.rows]
    positions = range(len(labels))
    fig, ax = plt.subplots(figsize=(max(6.0, 1.6 * len(labels)), 4.0))
    width = 0.38
    ax.bar([p - width / 2 for p in positions], baseline, width, label="baseline", color="#888888")
    ax.bar([p + width / 2 for p in positions], proposed, width, label="suggested pipeline", color="#2b6cb0")
    ax.set_xticks(list(positions))
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("score")
    ax.legend(loc="lower right")
    ax.set_title(f"Baseline vs suggested pipeline over {report.n_docs} documents")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_report(report: ComparisonReport, out_dir: str | Path, manifest: dict | None = None) -> dict[str, Path]:
    """Write all three artifacts into out_dir; returns their paths."""
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    table = root / TABLE_NAME
    structured = root / REPORT_NAME
    figure = root / FIGURE_NAME
    write_table(report, table)
    structured.write_text(
        json.dumps(report_payload(report, manifest), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    write_figure(report, figure)
    return {"table": table, "report": structured, "figure": figure}
