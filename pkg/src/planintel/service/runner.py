"""Task execution and commit orchestration shared by the HTTP app and the CLI."""

from __future__ import annotations

from ..pii import detect_pii
from ..pipeline import run_task
from ..redaction import RedactionResult, build_plan, commit_redaction
from ..review import CONFIRMED, EDITED, ReviewItem, SUGGESTED
from ..vischeck import detect_visual
from .store import ServiceStore, detection_payload, item_kind


class NothingToCommit(Exception):
    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(message)


class UnresolvedItems(Exception):
    def __init__(self, item_ids: list[str]):
        self.item_ids = item_ids
        super().__init__(
            "every PII item must be explicitly confirmed or rejected before commit: "
            + ", ".join(item_ids)
        )


def execute_task(store: ServiceStore, configs: dict, provider, doc_id: str, task_kind: str) -> dict:
    """Run one provider task and persist its products; returns a job summary."""
    bundle = store.load_document(doc_id)
    config = configs[task_kind]
    with store.doc_lock(doc_id):
        if task_kind == "extraction":
            result = run_task(bundle, config, provider, store.audit)
            item_ids = []
            for suggestion in result.suggestions:
                item = ReviewItem(store.next_item_id(doc_id, "field"), doc_id, suggestion)
                store.add_items([item])
                item_ids.append(item.item_id)
            return {
                "item_ids": item_ids,
                "suggestions": len(item_ids),
                "cost_micro": result.cost.total,
                "attempts": len(result.attempts_log),
            }
        if task_kind == "pii_detection":
            candidates = detect_pii(bundle, config, provider, store.audit)
            item_ids = []
            for candidate in candidates:
                item = ReviewItem(store.next_item_id(doc_id, "pii"), doc_id, candidate)
                store.add_items([item])
                item_ids.append(item.item_id)
            return {"item_ids": item_ids, "candidates": len(item_ids)}
        detections = detect_visual(bundle, config, provider, store.audit)
        store.save_detections(doc_id, detections)
        return {"detections": [detection_payload(d) for d in detections]}


def commit_confirmed(store: ServiceStore, doc_id: str, operator_id: str) -> RedactionResult:
    """Commit every Confirmed PII item; refuses while any item is still open.

    Re-commits start from the already-redacted bundle so earlier removals
    survive, and the returned final hash always covers the cumulative result.
    """
    with store.doc_lock(doc_id):
        pii_items = [i for i in store.items_for_doc(doc_id) if item_kind(i) == "pii"]
        if not pii_items:
            raise NothingToCommit("nothing_to_commit", "no PII review items exist for this document")
        unresolved = [i.item_id for i in pii_items if i.state in (SUGGESTED, EDITED)]
        if unresolved:
            raise UnresolvedItems(unresolved)
        confirmed = [i for i in pii_items if i.state == CONFIRMED]
        if not confirmed:
            raise NothingToCommit("empty_plan", "no Confirmed PII items to redact")
        plan = build_plan(doc_id, confirmed, operator_id)
        source = store.load_redacted(doc_id) if store.has_redacted(doc_id) else store.load_document(doc_id)
        result = commit_redaction(source, plan, store.audit, review_items=confirmed)
        store.save_redacted(result.new_bundle)
        for item in result.committed_items:
            store.update_item(item)
        return result
