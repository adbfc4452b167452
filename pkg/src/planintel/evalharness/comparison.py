"""Run the rule baseline and the mock-scripted pipeline over one corpus.

Both arms are scored by the same metric functions on the same gold, producing
the classic comparison table: span F1 for Title and Date, recall for Names
and Addresses, and mAP@.5 for the two planted symbols.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..audit import AuditLog
from ..docmodel import DocumentBundle, document_text
from ..pii import detect_pii
from ..pipeline import TaskConfig, run_task
from ..vischeck import classical_detections, detect_visual
from .baseline import baseline_ner
from .corpus import GoldAnnotation
from .metrics import APResult, F1Score, RecallReport, ScoredBox, map_at_50, pooled_recall, span_f1

NER_FIELDS = ("Title", "Date")
RECALL_CATEGORIES = ("Names", "Addresses")
DETECTION_LABELS = ("north_point", "red_line")


@dataclass(frozen=True)
class MetricReport:
    """One arm's scores; shared shape for the baseline and the pipeline."""

    ner_f1: dict[str, F1Score]
    pii_recall: RecallReport
    detection_map: dict[str, APResult]
    mean_ap: float | None


@dataclass(frozen=True)
class ComparisonRow:
    section: str
    metric: str
    baseline: float | None
    proposed: float | None


@dataclass(frozen=True)
class ComparisonReport:
    baseline: MetricReport
    proposed: MetricReport
    rows: tuple[ComparisonRow, ...]
    n_docs: int
    total_cost_micro: int  # pipeline arm, all tasks


def _score_arm(
    gold_field_spans: dict[str, set],
    gold_pii: dict[str, list],
    gold_boxes: dict[str, dict],
    pred_field_spans: dict[str, set],
    pred_pii: dict[str, list],
    pred_boxes: dict[str, list],
) -> MetricReport:
    ner = {
        field: span_f1(sorted(gold_field_spans[field]), sorted(pred_field_spans[field]))
        for field in NER_FIELDS
    }
    recall = pooled_recall(gold_pii, pred_pii)
    detection, mean_ap = map_at_50(gold_boxes, pred_boxes)
    return MetricReport(ner, recall, detection, mean_ap)


def run_comparison(
    bundles: list[DocumentBundle],
    golds: list[GoldAnnotation],
    provider,
    configs: dict[str, TaskConfig],
    audit: AuditLog,
) -> ComparisonReport:
    """Score both arms on the corpus; any missing fixture aborts the run."""
    if len(bundles) != len(golds):
        raise ValueError("bundles and golds must align")
    for task_kind in ("extraction", "pii_detection", "visual_detection"):
        if task_kind not in configs:
            raise ValueError(f"missing task config {task_kind!r}")

    gold_field_spans: dict[str, set] = {f: set() for f in NER_FIELDS}
    gold_pii: dict[str, list] = {}
    gold_boxes: dict[str, dict] = {label: {} for label in DETECTION_LABELS}
    base_field_spans: dict[str, set] = {f: set() for f in NER_FIELDS}
    base_pii: dict[str, list] = {}
    base_boxes: dict[str, list] = {label: [] for label in DETECTION_LABELS}
    prop_field_spans: dict[str, set] = {f: set() for f in NER_FIELDS}
    prop_pii: dict[str, list] = {}
    prop_boxes: dict[str, list] = {label: [] for label in DETECTION_LABELS}
    seq_before = max((e.seq for e in audit.events()), default=-1)

    for bundle, gold in zip(bundles, golds):
        doc_id = bundle.doc_id
        for field in NER_FIELDS:
            for start, end in gold.field_spans.get(field, []):
                gold_field_spans[field].add((doc_id, start, end))
        gold_pii[doc_id] = list(gold.pii_items)
        for label, boxes in gold.symbol_boxes.items():
            if label in gold_boxes:
                gold_boxes[label].setdefault((doc_id, 0), []).extend(boxes)

        base = baseline_ner(bundle)
        for field in NER_FIELDS:
            for start, end in base.field_spans.get(field, []):
                base_field_spans[field].add((doc_id, start, end))
        base_pii[doc_id] = list(base.pii)
        for det in classical_detections(bundle):
            if det.label in base_boxes:
                base_boxes[det.label].append(ScoredBox(doc_id, det.page_index, det.bbox, det.score))

        text = document_text(bundle)
        result = run_task(bundle, configs["extraction"], provider, audit)
        for suggestion in result.suggestions:
            if suggestion.field_name not in NER_FIELDS or not suggestion.raw_value:
                continue
            at = text.find(suggestion.raw_value)
            if at >= 0:  # a value absent from the document yields no span claim
                prop_field_spans[suggestion.field_name].add((doc_id, at, at + len(suggestion.raw_value)))

        prop_pii[doc_id] = detect_pii(bundle, configs["pii_detection"], provider, audit)
        for det in detect_visual(bundle, configs["visual_detection"], provider, audit):
            if det.label in prop_boxes:
                prop_boxes[det.label].append(ScoredBox(doc_id, det.page_index, det.bbox, det.score))

    baseline_report = _score_arm(
        gold_field_spans, gold_pii, gold_boxes, base_field_spans, base_pii, base_boxes
    )
    proposed_report = _score_arm(
        gold_field_spans, gold_pii, gold_boxes, prop_field_spans, prop_pii, prop_boxes
    )
    total_cost = sum(
        e.payload["total_cost_micro"]
        for e in audit.query(action="task_completed", seq_range=(seq_before + 1, 2**62))
    )

    rows = []
    for field in NER_FIELDS:
        rows.append(
            ComparisonRow("NER F1", field, baseline_report.ner_f1[field].f1, proposed_report.ner_f1[field].f1)
        )
    for category in RECALL_CATEGORIES:
        rows.append(
            ComparisonRow(
                "PII recall",
                category,
                baseline_report.pii_recall.per_category.get(category),
                proposed_report.pii_recall.per_category.get(category),
            )
        )
    for label in DETECTION_LABELS:
        rows.append(
            ComparisonRow(
                "mAP@.5",
                label,
                baseline_report.detection_map[label].ap,
                proposed_report.detection_map[label].ap,
            )
        )
    return ComparisonReport(
        baseline=baseline_report,
        proposed=proposed_report,
        rows=tuple(rows),
        n_docs=len(bundles),
        total_cost_micro=total_cost,
    )
