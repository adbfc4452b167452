"""Filesystem persistence: bundle store, append-only review log, job records.

Restart recovery is replay: review items are restored from their latest
snapshot line, the audit log is already an append-only file, and bundles
live as canonical directories. No database anywhere.
"""

from __future__ import annotations

import json
import threading
from collections import defaultdict
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from ..audit import AuditLog
from ..docmodel import BoundingBox, DocumentBundle, load_bundle, save_bundle
from ..extraction import FieldSuggestion
from ..pii import Location, PIICandidate
from ..review import HistoryEntry, ReviewItem
from ..vischeck import Detection

JOB_STATUSES = ("queued", "running", "done", "failed")


class UnknownDocument(KeyError):
    pass


class UnknownItem(KeyError):
    pass


class UnknownJob(KeyError):
    pass


class DuplicateDocument(ValueError):
    pass


def _utc_now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


class LockingAuditLog(AuditLog):
    """Single-lane writer: appends are serialized across request threads."""

    def __init__(self, directory: str | Path):
        super().__init__(directory)
        self._append_lock = threading.Lock()

    def append(self, actor: str, action: str, payload: dict):
        with self._append_lock:
            return super().append(actor, action, payload)


# ---------------------------------------------------------------------------
# Payload serialization (review items must survive a process restart)

def location_payload(loc: Location) -> dict:
    return {
        "page_index": loc.page_index,
        "bbox": [loc.bbox.x, loc.bbox.y, loc.bbox.w, loc.bbox.h],
        "span_id": loc.span_id,
    }


def location_from_payload(raw: dict) -> Location:
    return Location(raw["page_index"], BoundingBox(*raw["bbox"]), raw.get("span_id"))


def candidate_payload(candidate: PIICandidate) -> dict:
    return {
        "candidate_id": candidate.candidate_id,
        "category": candidate.category,
        "value": candidate.value,
        "confidence": candidate.confidence,
        "verifier_status": candidate.verifier_status,
        "locations": [location_payload(loc) for loc in candidate.locations],
    }


def candidate_from_payload(raw: dict) -> PIICandidate:
    return PIICandidate(
        candidate_id=raw["candidate_id"],
        category=raw["category"],
        value=raw["value"],
        locations=tuple(location_from_payload(loc) for loc in raw["locations"]),
        confidence=raw["confidence"],
        verifier_status=raw["verifier_status"],
    )


def suggestion_payload(suggestion: FieldSuggestion) -> dict:
    return {
        "field_name": suggestion.field_name,
        "value": suggestion.value,
        "raw_value": suggestion.raw_value,
        "confidence": suggestion.confidence,
        "source_spans": list(suggestion.source_spans),
        "status": suggestion.status,
    }


def suggestion_from_payload(raw: dict) -> FieldSuggestion:
    return FieldSuggestion(
        field_name=raw["field_name"],
        value=raw["value"],
        raw_value=raw["raw_value"],
        confidence=raw["confidence"],
        source_spans=tuple(raw["source_spans"]),
        status=raw["status"],
    )


def item_kind(item: ReviewItem) -> str:
    return "pii" if isinstance(item.payload, PIICandidate) else "field"


def review_item_payload(item: ReviewItem) -> dict:
    kind = item_kind(item)
    body = candidate_payload(item.payload) if kind == "pii" else suggestion_payload(item.payload)
    return {
        "item_id": item.item_id,
        "doc_id": item.doc_id,
        "kind": kind,
        "payload": body,
        "state": item.state,
        "operator_id": item.operator_id,
        "edited_value": item.edited_value,
        "history": [
            {"state": h.state, "operator_id": h.operator_id, "action": h.action, "at": h.at}
            for h in item.history
        ],
    }


def review_item_from_payload(raw: dict) -> ReviewItem:
    if raw["kind"] == "pii":
        payload = candidate_from_payload(raw["payload"])
    else:
        payload = suggestion_from_payload(raw["payload"])
    return ReviewItem(
        item_id=raw["item_id"],
        doc_id=raw["doc_id"],
        payload=payload,
        state=raw["state"],
        operator_id=raw.get("operator_id"),
        edited_value=raw.get("edited_value"),
        history=tuple(
            HistoryEntry(h["state"], h["operator_id"], h["action"], h["at"])
            for h in raw.get("history", [])
        ),
    )


def detection_payload(det: Detection) -> dict:
    return {
        "label": det.label,
        "page_index": det.page_index,
        "bbox": [det.bbox.x, det.bbox.y, det.bbox.w, det.bbox.h],
        "score": det.score,
    }


def detection_from_payload(raw: dict) -> Detection:
    return Detection(
        label=raw["label"],
        bbox=BoundingBox(*raw["bbox"]),
        score=raw["score"],
        page_index=raw["page_index"],
    )


# ---------------------------------------------------------------------------
# Job records

@dataclass(frozen=True)
class JobRecord:
    job_id: str
    doc_id: str
    task_kind: str
    status: str
    result: dict | None = None
    error: str | None = None
    created_at: str = ""
    updated_at: str = ""

    def to_payload(self) -> dict:
        return {
            "job_id": self.job_id,
            "doc_id": self.doc_id,
            "task_kind": self.task_kind,
            "status": self.status,
            "result": self.result,
            "error": self.error,
            "created_at": self.created_at,
            "updated_at": self.updated_at,
        }


_JOB_RANK = {status: rank for rank, status in enumerate(JOB_STATUSES)}


class ServiceStore:
    """All state the HTTP layer needs, backed entirely by files under data_dir."""

    def __init__(self, data_dir: str | Path):
        self.root = Path(data_dir)
        self.bundles_dir = self.root / "bundles"
        self.redacted_dir = self.root / "redacted"
        self.jobs_dir = self.root / "jobs"
        self.detections_dir = self.root / "detections"
        self.review_log = self.root / "review.jsonl"
        for directory in (self.bundles_dir, self.redacted_dir, self.jobs_dir, self.detections_dir):
            directory.mkdir(parents=True, exist_ok=True)
        self.audit = LockingAuditLog(self.root / "audit")
        self._items: dict[str, ReviewItem] = {}
        self._item_order: list[str] = []
        self._doc_locks: dict[str, threading.Lock] = defaultdict(threading.Lock)
        self._locks_guard = threading.Lock()
        self._review_lock = threading.Lock()
        self._replay_review_log()

    # -- locking ------------------------------------------------------------

    def doc_lock(self, doc_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._doc_locks[doc_id]

    # -- documents ----------------------------------------------------------

    def has_document(self, doc_id: str) -> bool:
        return (self.bundles_dir / doc_id).is_dir()

    def save_document(self, bundle: DocumentBundle) -> None:
        if self.has_document(bundle.doc_id):
            raise DuplicateDocument(bundle.doc_id)
        save_bundle(bundle, self.bundles_dir / bundle.doc_id)

    def load_document(self, doc_id: str) -> DocumentBundle:
        if not self.has_document(doc_id):
            raise UnknownDocument(doc_id)
        return load_bundle(self.bundles_dir / doc_id)

    def list_documents(self) -> list[str]:
        return sorted(p.name for p in self.bundles_dir.iterdir() if p.is_dir())

    def save_redacted(self, bundle: DocumentBundle) -> None:
        target = self.redacted_dir / bundle.doc_id
        if target.exists():
            # a re-commit supersedes the previous redacted artifact
            import shutil

            shutil.rmtree(target)
        save_bundle(bundle, target)

    def load_redacted(self, doc_id: str) -> DocumentBundle:
        target = self.redacted_dir / doc_id
        if not target.is_dir():
            raise UnknownDocument(f"no redacted bundle for {doc_id}")
        return load_bundle(target)

    def has_redacted(self, doc_id: str) -> bool:
        return (self.redacted_dir / doc_id).is_dir()

    # -- review items -------------------------------------------------------

    def _replay_review_log(self) -> None:
        if not self.review_log.exists():
            return
        for line in self.review_log.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            record = json.loads(line)
            item = review_item_from_payload(record["item"])
            if item.item_id not in self._items:
                self._item_order.append(item.item_id)
            self._items[item.item_id] = item

    def _write_snapshot(self, item: ReviewItem) -> None:
        record = {"at": _utc_now(), "item": review_item_payload(item)}
        with self.review_log.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n")

    def add_items(self, items: list[ReviewItem]) -> None:
        with self._review_lock:
            for item in items:
                if item.item_id in self._items:
                    raise ValueError(f"review item {item.item_id!r} already exists")
                self._write_snapshot(item)
                self._items[item.item_id] = item
                self._item_order.append(item.item_id)

    def update_item(self, item: ReviewItem) -> None:
        with self._review_lock:
            if item.item_id not in self._items:
                raise UnknownItem(item.item_id)
            self._write_snapshot(item)
            self._items[item.item_id] = item

    def get_item(self, item_id: str) -> ReviewItem:
        try:
            return self._items[item_id]
        except KeyError:
            raise UnknownItem(item_id) from None

    def items_for_doc(self, doc_id: str) -> list[ReviewItem]:
        return [self._items[i] for i in self._item_order if self._items[i].doc_id == doc_id]

    def next_item_id(self, doc_id: str, kind: str) -> str:
        count = sum(
            1
            for i in self._item_order
            if self._items[i].doc_id == doc_id and item_kind(self._items[i]) == kind
        )
        return f"{doc_id}/{kind}/{count:04d}"

    # -- jobs ---------------------------------------------------------------

    def _job_path(self, job_id: str) -> Path:
        return self.jobs_dir / f"{job_id}.json"

    def new_job(self, doc_id: str, task_kind: str) -> JobRecord:
        with self._review_lock:
            n = len(list(self.jobs_dir.glob("job-*.json")))
            job = JobRecord(
                job_id=f"job-{n:06d}",
                doc_id=doc_id,
                task_kind=task_kind,
                status="queued",
                created_at=_utc_now(),
                updated_at=_utc_now(),
            )
            self._job_path(job.job_id).write_text(
                json.dumps(job.to_payload(), sort_keys=True, indent=2), encoding="utf-8"
            )
        return job

    def update_job(
        self, job_id: str, status: str, result: dict | None = None, error: str | None = None
    ) -> JobRecord:
        if status not in JOB_STATUSES:
            raise ValueError(f"unknown job status {status!r}")
        current = self.get_job(job_id)
        if _JOB_RANK[status] < _JOB_RANK[current.status]:
            raise ValueError(f"job {job_id}: cannot move {current.status} -> {status}")
        job = JobRecord(
            job_id=current.job_id,
            doc_id=current.doc_id,
            task_kind=current.task_kind,
            status=status,
            result=result if result is not None else current.result,
            error=error if error is not None else current.error,
            created_at=current.created_at,
            updated_at=_utc_now(),
        )
        self._job_path(job_id).write_text(
            json.dumps(job.to_payload(), sort_keys=True, indent=2), encoding="utf-8"
        )
        return job

    def get_job(self, job_id: str) -> JobRecord:
        path = self._job_path(job_id)
        if not path.is_file():
            raise UnknownJob(job_id)
        raw = json.loads(path.read_text(encoding="utf-8"))
        return JobRecord(**raw)

    # -- detections (latest visual task result, for preview overlays) --------

    def save_detections(self, doc_id: str, detections: list[Detection]) -> None:
        path = self.detections_dir / f"{doc_id}.json"
        path.write_text(
            json.dumps([detection_payload(d) for d in detections], sort_keys=True, indent=2),
            encoding="utf-8",
        )

    def load_detections(self, doc_id: str) -> list[Detection]:
        path = self.detections_dir / f"{doc_id}.json"
        if not path.is_file():
            return []
        return [detection_from_payload(d) for d in json.loads(path.read_text(encoding="utf-8"))]
