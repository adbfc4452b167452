"""Scripted provider responses derived from gold, with controllable error injection.

The mock arm of the comparison would be meaningless if the fixtures were
perfect by construction and nothing could degrade, so `make_fixtures` accepts
a corruption rate: that fraction of documents (rounded) gets a garbled title,
a garbled date, one dropped PII item, and a displaced north-point box —
emulating the value errors a real model makes.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

from .corpus import PAGE_W, GoldAnnotation

INPUT_TOKENS = 1200
OUTPUT_TOKENS = 260
GARBLE_SUFFIX = " (illegible)"  # never occurs in generated text, so anchoring fails


def corrupted_doc_ids(golds: list[GoldAnnotation], corruption_rate: float, seed: int) -> set[str]:
    """Deterministic pick of round(rate * n) documents."""
    if not 0.0 <= corruption_rate <= 1.0:
        raise ValueError("corruption_rate must be within [0, 1]")
    n_corrupt = round(corruption_rate * len(golds))
    rng = random.Random(seed * 1_000_003 + 17)
    return set(rng.sample([g.doc_id for g in golds], n_corrupt))


def _extraction_payload(gold: GoldAnnotation, corrupt: bool) -> dict:
    fields = {}
    for name in ("Title", "Date", "Scale"):
        value = gold.field_values[name]
        if corrupt and name in ("Title", "Date"):
            value += GARBLE_SUFFIX
        fields[name] = {"value": value, "confidence": 0.95 if not corrupt else 0.62}
    return {"fields": fields}


def _pii_payload(gold: GoldAnnotation, corrupt: bool) -> dict:
    items = list(gold.pii_items)
    if corrupt and items:
        items = items[:-1]
    candidates = []
    for item in items:
        loc = item.locations[0]
        candidates.append(
            {
                "category": item.category,
                "value": item.value,
                "confidence": 0.92,
                "page_index": loc.page_index,
                "bbox": [loc.bbox.x, loc.bbox.y, loc.bbox.w, loc.bbox.h],
            }
        )
    return {"candidates": candidates}


def _visual_payload(gold: GoldAnnotation, corrupt: bool) -> dict:
    detections = []
    for label, boxes in sorted(gold.symbol_boxes.items()):
        score = 0.92 if label == "north_point" else 0.90
        for box in boxes:
            x = box.x
            if corrupt and label == "north_point":
                # displace past its own width: IoU with gold drops to zero
                x = x - box.w - 12 if x + 2 * box.w + 12 > PAGE_W else x + box.w + 12
            detections.append(
                {"label": label, "page_index": 0, "bbox": [x, box.y, box.w, box.h], "score": score}
            )
    return {"detections": detections}


def make_fixtures(
    out_dir: str | Path,
    golds: list[GoldAnnotation],
    corruption_rate: float = 0.0,
    seed: int = 0,
) -> set[str]:
    """Write one attempt-1 fixture per (doc, task); returns the corrupted doc ids."""
    root = Path(out_dir)
    corrupted = corrupted_doc_ids(golds, corruption_rate, seed)
    builders = {
        "extraction": _extraction_payload,
        "pii_detection": _pii_payload,
        "visual_detection": _visual_payload,
    }
    for gold in golds:
        doc_dir = root / gold.doc_id
        doc_dir.mkdir(parents=True, exist_ok=True)
        for task_kind, build in builders.items():
            fixture = {
                "payload": build(gold, gold.doc_id in corrupted),
                "input_tokens": INPUT_TOKENS,
                "output_tokens": OUTPUT_TOKENS,
            }
            path = doc_dir / f"{task_kind}_attempt1.json"
            path.write_text(json.dumps(fixture, indent=2, sort_keys=True), encoding="utf-8")
    return corrupted
