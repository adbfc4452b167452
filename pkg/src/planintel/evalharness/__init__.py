"""Metrics, synthetic corpus, classical baseline, and the comparison harness."""

from .baseline import BaselinePredictions, baseline_ner, scan_dates
from .comparison import ComparisonReport, ComparisonRow, MetricReport, run_comparison
from .corpus import (
    GoldAnnotation,
    GoldPIIItem,
    generate_synthetic_corpus,
    gold_from_payload,
    gold_to_payload,
    load_corpus,
    save_corpus,
)
from .fixtures import corrupted_doc_ids, make_fixtures
from .metrics import (
    APResult,
    F1Score,
    RecallReport,
    ScoredBox,
    average_precision,
    iou,
    map_at_50,
    pooled_recall,
    recall_by_category,
    span_f1,
)
from .reporting import format_metric, report_payload, write_report, write_table

__all__ = [
    "APResult",
    "BaselinePredictions",
    "ComparisonReport",
    "ComparisonRow",
    "F1Score",
    "GoldAnnotation",
    "GoldPIIItem",
    "MetricReport",
    "RecallReport",
    "ScoredBox",
    "average_precision",
    "baseline_ner",
    "corrupted_doc_ids",
    "format_metric",
    "generate_synthetic_corpus",
    "gold_from_payload",
    "gold_to_payload",
    "iou",
    "load_corpus",
    "make_fixtures",
    "map_at_50",
    "pooled_recall",
    "recall_by_category",
    "report_payload",
    "run_comparison",
    "save_corpus",
    "scan_dates",
    "span_f1",
    "write_report",
    "write_table",
]
