"""HTTP surface tying the modules together under /api/v1.

Suggestions flow one way: tasks create review items, humans transition them,
and only Confirmed PII items can reach the redaction commit path. Every
mutating endpoint requires an operator_id and lands at least one audit event
attributed to it.
"""

from __future__ import annotations

import io
import tempfile
import zipfile
from pathlib import Path

from fastapi import BackgroundTasks, FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel
from starlette.exceptions import HTTPException as StarletteHTTPException

from ..audit import AuditEvent
from ..docmodel import BundleError, DocumentBundle, content_hash, load_bundle
from ..pipeline import TASK_KINDS, TaskFailed, load_provider_paths, load_task_config
from ..providers import encode_image
from ..redaction import CommitRejected, ScrubFailed, UnresolvableLocation
from ..review import IllegalTransition, acceptance_rate, prioritize, transition
from ..roi import compute_roi, inputs_from_payload
from ..vischeck import Detection, TextEvidence, classical_detections, detect_visual, evaluate_rule_pack, load_rule_pack
from .runner import NothingToCommit, UnresolvedItems, commit_confirmed, execute_task
from .store import (
    DuplicateDocument,
    ServiceStore,
    UnknownDocument,
    UnknownItem,
    UnknownJob,
    detection_payload,
    item_kind,
    review_item_payload,
)

API_PREFIX = "/api/v1"


class ServiceError(Exception):
    """Maps straight onto the uniform error envelope."""

    def __init__(self, status: int, code: str, message: str, detail: dict | None = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.detail = detail or {}


def _envelope(code: str, message: str, detail: dict | None = None) -> dict:
    return {"error": {"code": code, "message": message, "detail": detail or {}}}


class TaskBody(BaseModel):
    task_kind: str
    operator_id: str
    direct: bool | None = None


class TransitionBody(BaseModel):
    action: str
    operator_id: str
    value: str | None = None


class CommitBody(BaseModel):
    operator_id: str


class VischeckBody(BaseModel):
    operator_id: str
    rule_pack: str = "site_plan_uk"
    source: str = "provider"


class AssessmentBody(BaseModel):
    operator_id: str
    note: str


def _require_operator(operator_id: str) -> None:
    if not operator_id or not operator_id.strip():
        raise ServiceError(422, "operator_required", "operator_id must be non-empty")


def _event_payload(event: AuditEvent) -> dict:
    return {
        "seq": event.seq,
        "ts": event.ts,
        "actor": event.actor,
        "action": event.action,
        "payload_digest": event.payload_digest,
        "prev_hash": event.prev_hash,
        "event_hash": event.event_hash,
        "payload": event.payload,
    }


def _evidence_payload(evidence) -> dict:
    if isinstance(evidence, Detection):
        body = detection_payload(evidence)
        body["type"] = "detection"
        return body
    if isinstance(evidence, TextEvidence):
        return {
            "type": "text",
            "page_index": evidence.page_index,
            "span_id": evidence.span_id,
            "text": evidence.text,
            "bbox": [evidence.bbox.x, evidence.bbox.y, evidence.bbox.w, evidence.bbox.h],
        }
    raise TypeError(f"unknown evidence type {type(evidence)!r}")


def _bundle_from_zip(body: bytes) -> DocumentBundle:
    if not body:
        raise ServiceError(400, "empty_upload", "request body must be a zip archive of a bundle")
    try:
        archive = zipfile.ZipFile(io.BytesIO(body))
    except zipfile.BadZipFile as exc:
        raise ServiceError(400, "bad_archive", f"not a zip archive: {exc}") from exc
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        for member in archive.namelist():
            target = (root / member).resolve()
            if not str(target).startswith(str(root.resolve())):
                raise ServiceError(400, "bad_archive", f"unsafe member path {member!r}")
        archive.extractall(root)
        candidates = [root] + sorted(p for p in root.iterdir() if p.is_dir())
        bundle_dir = next((c for c in candidates if (c / "manifest").is_file()), None)
        if bundle_dir is None:
            raise ServiceError(400, "bad_archive", "archive contains no bundle manifest")
        try:
            return load_bundle(bundle_dir)
        except (BundleError, ValueError) as exc:
            raise ServiceError(400, "bad_bundle", str(exc)) from exc


def create_app(
    data_dir: str | Path,
    provider,
    direct_mode: bool = False,
) -> FastAPI:
    """Build the service around a data directory and an injected provider."""
    store = ServiceStore(data_dir)
    provider_paths = load_provider_paths()
    configs = {kind: load_task_config(kind, provider_paths) for kind in TASK_KINDS}
    app = FastAPI(title="planintel service", version="1")
    app.state.store = store

    # -- error envelope -----------------------------------------------------

    @app.exception_handler(ServiceError)
    async def _service_error(_: Request, exc: ServiceError):
        return JSONResponse(status_code=exc.status, content=_envelope(exc.code, exc.message, exc.detail))

    @app.exception_handler(RequestValidationError)
    async def _validation_error(_: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=422,
            content=_envelope("validation_error", "request failed validation", {"errors": exc.errors()}),
        )

    @app.exception_handler(StarletteHTTPException)
    async def _http_error(_: Request, exc: StarletteHTTPException):
        return JSONResponse(status_code=exc.status_code, content=_envelope("http_error", str(exc.detail)))

    _DOMAIN_ERRORS = [
        (UnknownDocument, 404, "unknown_document"),
        (UnknownItem, 404, "unknown_item"),
        (UnknownJob, 404, "unknown_job"),
        (DuplicateDocument, 409, "duplicate_document"),
        (IllegalTransition, 409, "illegal_transition"),
        (UnresolvableLocation, 422, "unresolvable_location"),
        (ScrubFailed, 500, "scrub_failed"),
    ]
    for exc_type, status, code in _DOMAIN_ERRORS:
        def _make(status=status, code=code):
            async def handler(_: Request, exc: Exception):
                message = str(exc.args[0]) if exc.args else str(exc)
                return JSONResponse(status_code=status, content=_envelope(code, message))

            return handler

        app.add_exception_handler(exc_type, _make())

    @app.exception_handler(CommitRejected)
    async def _commit_rejected(_: Request, exc: CommitRejected):
        return JSONResponse(
            status_code=422,
            content=_envelope("commit_rejected", str(exc), {"item_ids": exc.item_ids}),
        )

    @app.exception_handler(NothingToCommit)
    async def _nothing_to_commit(_: Request, exc: NothingToCommit):
        return JSONResponse(status_code=422, content=_envelope(exc.code, str(exc)))

    @app.exception_handler(UnresolvedItems)
    async def _unresolved_items(_: Request, exc: UnresolvedItems):
        return JSONResponse(
            status_code=422,
            content=_envelope("unresolved_items", str(exc), {"item_ids": exc.item_ids}),
        )

    @app.exception_handler(TaskFailed)
    async def _task_failed(_: Request, exc: TaskFailed):
        return JSONResponse(
            status_code=502,
            content=_envelope(
                "task_failed",
                str(exc),
                {
                    "task_kind": exc.task_kind,
                    "doc_id": exc.doc_id,
                    "attempts": [
                        {"attempt": a.attempt, "path": a.path, "prompt_kind": a.prompt_kind,
                         "outcome": a.outcome, "failure_kind": a.failure_kind, "detail": a.detail}
                        for a in exc.attempts_log
                    ],
                },
            ),
        )

    @app.exception_handler(ValueError)
    async def _value_error(_: Request, exc: ValueError):
        return JSONResponse(status_code=400, content=_envelope("invalid_request", str(exc)))

    # -- documents ----------------------------------------------------------

    @app.post(f"{API_PREFIX}/documents")
    async def ingest_document(request: Request, operator_id: str = Query(...)):
        _require_operator(operator_id)
        body = await request.body()
        bundle = _bundle_from_zip(body)
        bundle.validate()
        store.save_document(bundle)
        digest = content_hash(bundle)
        store.audit.append(
            operator_id,
            "Ingested",
            {"doc_id": bundle.doc_id, "content_hash": digest, "pages": len(bundle.pages)},
        )
        return {"doc_id": bundle.doc_id, "pages": len(bundle.pages), "content_hash": digest}

    @app.get(f"{API_PREFIX}/documents")
    async def list_documents():
        return {
            "documents": [
                {"doc_id": doc_id, "has_redacted": store.has_redacted(doc_id)}
                for doc_id in store.list_documents()
            ]
        }

    # -- tasks --------------------------------------------------------------

    def _execute_job(job_id: str, doc_id: str, task_kind: str, operator_id: str) -> None:
        store.update_job(job_id, "running")
        try:
            summary = execute_task(store, configs, provider, doc_id, task_kind)
            store.update_job(job_id, "done", result=summary)
        except TaskFailed as exc:
            store.update_job(
                job_id,
                "failed",
                result={
                    "attempts": [
                        {"attempt": a.attempt, "path": a.path, "prompt_kind": a.prompt_kind,
                         "outcome": a.outcome, "failure_kind": a.failure_kind, "detail": a.detail}
                        for a in exc.attempts_log
                    ]
                },
                error=str(exc),
            )
        except Exception as exc:  # surfaced through the job record, not a 500
            store.update_job(job_id, "failed", error=str(exc))

    @app.post(f"{API_PREFIX}/documents/{{doc_id}}/tasks")
    async def start_task(doc_id: str, body: TaskBody, background: BackgroundTasks):
        _require_operator(body.operator_id)
        if body.task_kind not in TASK_KINDS:
            raise ServiceError(400, "unknown_task_kind", f"task_kind must be one of {list(TASK_KINDS)}")
        if not store.has_document(doc_id):
            raise UnknownDocument(doc_id)
        job = store.new_job(doc_id, body.task_kind)
        store.audit.append(
            body.operator_id,
            "task_started",
            {"doc_id": doc_id, "task_kind": body.task_kind, "job_id": job.job_id},
        )
        run_direct = direct_mode if body.direct is None else body.direct
        if run_direct:
            _execute_job(job.job_id, doc_id, body.task_kind, body.operator_id)
        else:
            background.add_task(_execute_job, job.job_id, doc_id, body.task_kind, body.operator_id)
        return {"job": store.get_job(job.job_id).to_payload()}

    @app.get(f"{API_PREFIX}/jobs/{{job_id}}")
    async def get_job(job_id: str):
        return {"job": store.get_job(job_id).to_payload()}

    # -- review -------------------------------------------------------------

    @app.get(f"{API_PREFIX}/documents/{{doc_id}}/review")
    async def review_queue(doc_id: str):
        if not store.has_document(doc_id):
            raise UnknownDocument(doc_id)
        items = store.items_for_doc(doc_id)
        queue = prioritize(items)
        by_id = {item.item_id: item for item in items}
        return {
            "doc_id": doc_id,
            "items": [review_item_payload(by_id[item_id]) for item_id in queue.item_ids],
            "acceptance_rate": acceptance_rate(items),
        }

    @app.post(f"{API_PREFIX}/review/{{item_id:path}}/transition")
    async def transition_item(item_id: str, body: TransitionBody):
        _require_operator(body.operator_id)
        item = store.get_item(item_id)
        with store.doc_lock(item.doc_id):
            item = store.get_item(item_id)  # re-read under the lock
            updated = transition(item, body.action, body.operator_id, body.value, audit=store.audit)
            store.update_item(updated)
        return {"item": review_item_payload(updated)}

    # -- redaction commit ---------------------------------------------------

    @app.post(f"{API_PREFIX}/documents/{{doc_id}}/commit")
    async def commit_document(doc_id: str, body: CommitBody):
        _require_operator(body.operator_id)
        if not store.has_document(doc_id):
            raise UnknownDocument(doc_id)
        result = commit_confirmed(store, doc_id, body.operator_id)
        return {
            "doc_id": doc_id,
            "final_hash": result.final_hash,
            "scrub_clean": result.scrub_report.clean,
            "committed_item_ids": [i.item_id for i in result.committed_items],
            "removed_text_runs": len(result.removed_texts),
        }

    # -- preview ------------------------------------------------------------

    @app.get(f"{API_PREFIX}/documents/{{doc_id}}/preview")
    async def preview(doc_id: str, page: int = 0, redacted: bool = False):
        bundle = store.load_redacted(doc_id) if redacted else store.load_document(doc_id)
        if not (0 <= page < len(bundle.pages)):
            raise ServiceError(404, "unknown_page", f"page {page} out of range")
        target = bundle.pages[page]
        detections = [d for d in store.load_detections(doc_id) if d.page_index == page]
        return {
            "doc_id": doc_id,
            "page_index": page,
            "pages": len(bundle.pages),
            "width": target.width,
            "height": target.height,
            "image_png": encode_image(target.image),
            "spans": [
                {"span_id": s.span_id, "text": s.text,
                 "bbox": [s.bbox.x, s.bbox.y, s.bbox.w, s.bbox.h]}
                for s in target.spans
            ],
            "detections": [detection_payload(d) for d in detections],
        }

    # -- visual checks ------------------------------------------------------

    @app.post(f"{API_PREFIX}/documents/{{doc_id}}/vischeck")
    async def vischeck(doc_id: str, body: VischeckBody):
        _require_operator(body.operator_id)
        bundle = store.load_document(doc_id)
        if body.source not in ("provider", "classical"):
            raise ServiceError(400, "unknown_source", "source must be 'provider' or 'classical'")
        try:
            pack = load_rule_pack(body.rule_pack)
        except FileNotFoundError as exc:
            raise ServiceError(404, "unknown_rule_pack", str(exc)) from exc
        with store.doc_lock(doc_id):
            if body.source == "provider":
                detections = detect_visual(bundle, configs["visual_detection"], provider, store.audit)
            else:
                detections = classical_detections(bundle)
            store.save_detections(doc_id, detections)
            outcomes = evaluate_rule_pack(bundle, pack, detections)
            store.audit.append(
                body.operator_id,
                "vischeck_evaluated",
                {"doc_id": doc_id, "pack_id": pack.pack_id, "source": body.source,
                 "outcomes": [{"rule_id": o.rule_id, "satisfied": o.satisfied} for o in outcomes]},
            )
        return {
            "doc_id": doc_id,
            "pack_id": pack.pack_id,
            "detections": [detection_payload(d) for d in detections],
            "outcomes": [
                {"rule_id": o.rule_id, "satisfied": o.satisfied,
                 "evidence": [_evidence_payload(e) for e in o.evidence]}
                for o in outcomes
            ],
        }

    @app.post(f"{API_PREFIX}/documents/{{doc_id}}/assessment")
    async def record_assessment(doc_id: str, body: AssessmentBody):
        _require_operator(body.operator_id)
        if not store.has_document(doc_id):
            raise UnknownDocument(doc_id)
        event = store.audit.append(
            body.operator_id, "assessment_recorded", {"doc_id": doc_id, "note": body.note}
        )
        return {"recorded": True, "seq": event.seq}

    # -- audit --------------------------------------------------------------

    @app.get(f"{API_PREFIX}/documents/{{doc_id}}/audit")
    async def document_audit(doc_id: str):
        if not store.has_document(doc_id):
            raise UnknownDocument(doc_id)
        return {"events": [_event_payload(e) for e in store.audit.query(doc_id=doc_id)]}

    @app.get(f"{API_PREFIX}/audit/verify")
    async def audit_verify():
        report = store.audit.verify_chain()
        anchor = store.audit.head_anchor()
        return {
            "valid": report.valid,
            "checked": report.checked,
            "first_invalid_seq": report.first_invalid_seq,
            "truncated": report.truncated,
            "problems": report.problems,
            "head": None if anchor is None else {"seq": anchor[0], "event_hash": anchor[1]},
        }

    # -- roi ----------------------------------------------------------------

    @app.post(f"{API_PREFIX}/roi")
    async def roi(body: dict):
        try:
            inputs = inputs_from_payload(body)
        except KeyError as exc:
            raise ServiceError(400, "missing_field", f"missing ROI input {exc.args[0]!r}") from exc
        return compute_roi(inputs).to_payload()

    return app
