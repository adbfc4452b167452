"""Evaluation metrics: span F1, category recall, IoU, average precision."""

from __future__ import annotations

from dataclasses import dataclass

from ..docmodel import BoundingBox
from ..pii import normalize_value

MATCH_IOU = 0.5


@dataclass(frozen=True)
class F1Score:
    precision: float
    recall: float
    f1: float
    undefined: bool = False  # an empty denominator was hit; affected values forced to 0

    def __post_init__(self) -> None:
        for value in (self.precision, self.recall, self.f1):
            if not (0.0 <= value <= 1.0):
                raise ValueError(f"metric value {value} outside [0,1]")


def span_f1(gold: list[tuple], pred: list[tuple]) -> F1Score:
    """Exact-match span F1 over half-open intervals (set semantics)."""
    for span in list(gold) + list(pred):
        start, end = span[-2], span[-1]
        if start >= end:
            raise ValueError(f"malformed span {span}: start must precede end")
    gold_set, pred_set = set(gold), set(pred)
    tp = len(gold_set & pred_set)
    undefined = not gold_set or not pred_set
    precision = tp / len(pred_set) if pred_set else 0.0
    recall = tp / len(gold_set) if gold_set else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return F1Score(precision, recall, f1, undefined)


@dataclass(frozen=True)
class RecallReport:
    per_category: dict[str, float]
    micro: float
    macro: float
    pooled_tp: int
    pooled_total: int


def _pii_match(gold_item, pred_item) -> bool:
    """Same category and (same normalized value or any location pair with IoU ≥ 0.5)."""
    if gold_item.category != pred_item.category:
        return False
    if gold_item.value and pred_item.value:
        if normalize_value(gold_item.category, gold_item.value) == normalize_value(
            pred_item.category, pred_item.value
        ):
            return True
    for gl in gold_item.locations:
        for pl in pred_item.locations:
            if gl.page_index == pl.page_index and gl.bbox.iou(pl.bbox) >= MATCH_IOU:
                return True
    return False


def recall_by_category(gold: list, pred: list) -> RecallReport:
    """Recall per category, micro (pooled counts), macro (unweighted mean)."""
    categories = sorted({g.category for g in gold})
    per_category = {}
    pooled_tp = 0
    pooled_total = 0
    for category in categories:
        gold_items = [g for g in gold if g.category == category]
        matched = sum(1 for g in gold_items if any(_pii_match(g, p) for p in pred))
        per_category[category] = matched / len(gold_items)
        pooled_tp += matched
        pooled_total += len(gold_items)
    micro = pooled_tp / pooled_total if pooled_total else 0.0
    macro = sum(per_category.values()) / len(per_category) if per_category else 0.0
    return RecallReport(per_category, micro, macro, pooled_tp, pooled_total)


def pooled_recall(gold_by_doc: dict[str, list], pred_by_doc: dict[str, list]) -> RecallReport:
    """Corpus-level recall: items match only within their own document.

    Locations are page-relative, so cross-document IoU comparisons would be
    meaningless; this pools the per-document matched/total counts instead.
    """
    counts: dict[str, list[int]] = {}
    for doc_id, gold in gold_by_doc.items():
        pred = pred_by_doc.get(doc_id, [])
        for g in gold:
            matched, total = counts.setdefault(g.category, [0, 0])
            counts[g.category][1] = total + 1
            if any(_pii_match(g, p) for p in pred):
                counts[g.category][0] = matched + 1
    per_category = {c: tp / total for c, (tp, total) in sorted(counts.items())}
    pooled_tp = sum(tp for tp, _ in counts.values())
    pooled_total = sum(total for _, total in counts.values())
    micro = pooled_tp / pooled_total if pooled_total else 0.0
    macro = sum(per_category.values()) / len(per_category) if per_category else 0.0
    return RecallReport(per_category, micro, macro, pooled_tp, pooled_total)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    return a.iou(b)


@dataclass(frozen=True)
class APResult:
    ap: float | None  # None when the label had no gold and no predictions
    excluded: bool = False


def _detection_rank(det) -> tuple:
    return (-det.score, getattr(det, "doc_id", ""), det.page_index, det.bbox.x, det.bbox.y)


def average_precision(gold_boxes: dict, detections: list) -> APResult:
    """AP@.5 with greedy matching and all-points interpolation.

    gold_boxes: (doc_id, page_index) → list of BoundingBox for one label;
    detections carry doc_id, page_index, bbox, score.
    """
    n_gold = sum(len(v) for v in gold_boxes.values())
    if n_gold == 0 and not detections:
        return APResult(None, excluded=True)
    if n_gold == 0:
        return APResult(0.0)
    matched: dict[tuple, set[int]] = {key: set() for key in gold_boxes}
    flags = []
    for det in sorted(detections, key=_detection_rank):
        key = (det.doc_id, det.page_index)
        best_iou, best_idx = 0.0, None
        for idx, box in enumerate(gold_boxes.get(key, [])):
            if idx in matched[key]:
                continue
            value = det.bbox.iou(box)
            if value >= MATCH_IOU and value > best_iou:
                best_iou, best_idx = value, idx
        if best_idx is not None:
            matched[key].add(best_idx)
            flags.append(True)
        else:
            flags.append(False)
    if not flags:
        return APResult(0.0)
    # precision-recall points, then the all-points interpolated area
    tp = 0
    points = []
    for i, hit in enumerate(flags, start=1):
        tp += int(hit)
        points.append((tp / n_gold, tp / i))
    area = 0.0
    prev_recall = 0.0
    for i, (recall, _) in enumerate(points):
        if recall > prev_recall:
            best_precision = max(p for r, p in points[i:])
            area += (recall - prev_recall) * best_precision
            prev_recall = recall
    return APResult(area)


@dataclass(frozen=True)
class ScoredBox:
    """A detection qualified with its document for corpus-level AP."""

    doc_id: str
    page_index: int
    bbox: BoundingBox
    score: float


def map_at_50(gold: dict, detections: dict) -> tuple[dict[str, APResult], float | None]:
    """Per-label AP plus the mean over included labels.

    gold: label → {(doc_id, page_index) → [BoundingBox]};
    detections: label → [ScoredBox] (a plain dict).
    """
    labels = sorted(set(gold) | set(detections))
    results = {}
    included = []
    for label in labels:
        result = average_precision(gold.get(label, {}), detections.get(label, []))
        results[label] = result
        if not result.excluded:
            included.append(result.ap)
    mean = sum(included) / len(included) if included else None
    return results, mean
