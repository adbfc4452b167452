"""True content removal: span text deletion, pixel blackening, post-commit scrub."""

from __future__ import annotations

from dataclasses import dataclass, replace
from datetime import datetime, timezone

from .audit import AuditLog, payload_digest
from .docmodel import (
    BoundingBox,
    DocumentBundle,
    Page,
    TextSpan,
    char_box,
    content_hash,
    covered_chars,
    find_occurrence_regions,
)
from .pii import VERIFIER_GATED, VERIFIER_PASSED, Location, PIICandidate, verify_format
from .review import CONFIRMED, ReviewItem, transition


class UnresolvableLocation(Exception):
    """A plan location does not land inside the bundle."""


class CommitRejected(Exception):
    def __init__(self, reason: str, item_ids: list[str]):
        self.item_ids = item_ids
        super().__init__(f"{reason}: {', '.join(item_ids)}")


@dataclass(frozen=True)
class PlanItem:
    candidate_id: str
    category: str
    value: str
    locations: tuple[Location, ...]


@dataclass(frozen=True)
class RedactionPlan:
    doc_id: str
    items: tuple[PlanItem, ...]
    operator_id: str
    created_at: str

    def to_payload(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "operator_id": self.operator_id,
            "created_at": self.created_at,
            "items": [
                {
                    "candidate_id": item.candidate_id,
                    "category": item.category,
                    "value": item.value,
                    "locations": [
                        {"page_index": loc.page_index,
                         "bbox": [loc.bbox.x, loc.bbox.y, loc.bbox.w, loc.bbox.h],
                         "span_id": loc.span_id}
                        for loc in item.locations
                    ],
                }
                for item in self.items
            ],
        }

    def digest(self) -> str:
        return payload_digest(self.to_payload())


@dataclass(frozen=True)
class Residue:
    kind: str  # span_text | value_recoverable | raster_not_black | unresolvable
    needle: str
    page_index: int
    bbox: BoundingBox
    span_id: str | None = None


@dataclass(frozen=True)
class ScrubReport:
    clean: bool
    residues: tuple[Residue, ...] = ()

    def __post_init__(self) -> None:
        if self.clean != (not self.residues):
            raise ValueError("clean must hold exactly when there are no residues")


@dataclass(frozen=True)
class RedactionResult:
    new_bundle: DocumentBundle
    removed_texts: tuple[str, ...]
    final_hash: str
    scrub_report: ScrubReport
    committed_items: tuple[ReviewItem, ...] = ()

    def __post_init__(self) -> None:
        if not self.scrub_report.clean:
            raise ValueError("a result can only be issued for a clean scrub")
        if self.final_hash != content_hash(self.new_bundle):
            raise ValueError("final_hash must match the scrubbed bundle")


class ScrubFailed(Exception):
    def __init__(self, report: ScrubReport):
        self.report = report
        sites = ", ".join(f"{r.kind}@p{r.page_index}" for r in report.residues[:5])
        super().__init__(f"scrub found {len(report.residues)} residue(s): {sites}")


def _utc_now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def build_plan(doc_id: str, review_items: list[ReviewItem], operator_id: str) -> RedactionPlan:
    """Plan from Confirmed PII review items; anything else is rejected up front."""
    if not operator_id:
        raise CommitRejected("operator_id required", [i.item_id for i in review_items])
    not_confirmed = [i.item_id for i in review_items if i.state != CONFIRMED]
    if not_confirmed:
        raise CommitRejected("items not in state Confirmed", not_confirmed)
    blocked = []
    items = []
    for review_item in review_items:
        candidate: PIICandidate = review_item.payload
        if candidate.category in VERIFIER_GATED and verify_format(candidate) != VERIFIER_PASSED:
            blocked.append(review_item.item_id)
        items.append(PlanItem(candidate.candidate_id, candidate.category, candidate.value, candidate.locations))
    if blocked:
        raise CommitRejected("verify_format failed for redaction-gated items", blocked)
    return RedactionPlan(doc_id, tuple(items), operator_id, _utc_now())


def _check_locations(bundle: DocumentBundle, plan: RedactionPlan) -> None:
    if plan.doc_id != bundle.doc_id:
        raise UnresolvableLocation(f"plan is for {plan.doc_id!r}, bundle is {bundle.doc_id!r}")
    for item in plan.items:
        for loc in item.locations:
            if not (0 <= loc.page_index < len(bundle.pages)):
                raise UnresolvableLocation(
                    f"item {item.candidate_id}: page {loc.page_index} out of range"
                )
            if not bundle.pages[loc.page_index].extent().contains(loc.bbox):
                raise UnresolvableLocation(
                    f"item {item.candidate_id}: bbox exceeds page {loc.page_index}"
                )


def _runs(indices: list[int]) -> list[tuple[int, int]]:
    """Sorted indices to half-open [start, end) runs."""
    runs = []
    for i in indices:
        if runs and i == runs[-1][1]:
            runs[-1] = (runs[-1][0], i + 1)
        else:
            runs.append((i, i + 1))
    return runs


def apply_redactions(bundle: DocumentBundle, plan: RedactionPlan) -> RedactionResult:
    """Remove covered span text, blacken raster regions, then verify the scrub."""
    _check_locations(bundle, plan)
    boxes_by_page: dict[int, list[BoundingBox]] = {}
    for item in plan.items:
        for loc in item.locations:
            boxes_by_page.setdefault(loc.page_index, []).append(loc.bbox)

    removed_texts: list[str] = []
    new_pages = []
    for page in bundle.pages:
        boxes = boxes_by_page.get(page.index, [])
        if not boxes:
            new_pages.append(Page(page.index, page.width, page.height, page.image.copy(), list(page.spans)))
            continue
        new_spans: list[TextSpan] = []
        for span in page.spans:
            covered: set[int] = set()
            for box in boxes:
                covered |= covered_chars(span, box)
            if not covered:
                new_spans.append(span)
                continue
            for start, end in _runs(sorted(covered)):
                removed_texts.append(span.text[start:end])
            kept = [i for i in range(len(span.text)) if i not in covered]
            for k, (start, end) in enumerate(_runs(kept)):
                new_spans.append(
                    TextSpan(
                        f"{span.span_id}~{k}",
                        span.text[start:end],
                        span.page_index,
                        char_box(span, start, end),
                    )
                )
        image = page.image.copy()
        for box in boxes:
            image[box.y : box.bottom, box.x : box.right] = 0
        new_pages.append(Page(page.index, page.width, page.height, image, new_spans))

    new_bundle = DocumentBundle(bundle.doc_id, new_pages, dict(bundle.metadata), bundle.provenance)
    new_bundle.validate()
    report = scrub_verify(new_bundle, plan)
    if not report.clean:
        raise ScrubFailed(report)
    return RedactionResult(
        new_bundle=new_bundle,
        removed_texts=tuple(removed_texts),
        final_hash=content_hash(new_bundle),
        scrub_report=report,
    )


def _positive_overlap(a: BoundingBox, b: BoundingBox) -> bool:
    return a.intersection_area(b) > 0


def scrub_verify(bundle: DocumentBundle, plan: RedactionPlan) -> ScrubReport:
    """Per-site checks: no span text, no anchored value, uniformly black raster."""
    residues: list[Residue] = []
    for item in plan.items:
        for loc in item.locations:
            if not (0 <= loc.page_index < len(bundle.pages)):
                residues.append(Residue("unresolvable", item.value, loc.page_index, loc.bbox))
                continue
            page = bundle.pages[loc.page_index]
            for span in page.spans:
                if _positive_overlap(span.bbox, loc.bbox):
                    residues.append(
                        Residue("span_text", span.text, page.index, span.bbox, span.span_id)
                    )
            box = loc.bbox
            region = page.image[box.y : box.bottom, box.x : box.right]
            if region.size == 0 or int(region.max()) > 0:
                residues.append(Residue("raster_not_black", item.value, page.index, box))
        if item.value:
            pages_with_sites = {loc.page_index: [l.bbox for l in item.locations if l.page_index == loc.page_index]
                                for loc in item.locations}
            for occ in find_occurrence_regions(bundle, item.value):
                site_boxes = pages_with_sites.get(occ.page_index, [])
                for frag in occ.fragments:
                    if any(_positive_overlap(frag.bbox, site) for site in site_boxes):
                        residues.append(
                            Residue("value_recoverable", item.value, occ.page_index, frag.bbox, frag.span_id)
                        )
                        break
    return ScrubReport(clean=not residues, residues=tuple(residues))


def commit_redaction(
    bundle: DocumentBundle,
    plan: RedactionPlan,
    audit: AuditLog,
    review_items: list[ReviewItem] | None = None,
) -> RedactionResult:
    """Gate, apply, scrub, and bind the audit quadruple; review items are committed."""
    matched: list[ReviewItem] = []
    if review_items is not None:
        by_candidate = {}
        for review_item in review_items:
            candidate = review_item.payload
            if isinstance(candidate, PIICandidate):
                by_candidate[candidate.candidate_id] = review_item
        missing = [i.candidate_id for i in plan.items if i.candidate_id not in by_candidate]
        if missing:
            raise CommitRejected("plan items without a review item", missing)
        matched = [by_candidate[i.candidate_id] for i in plan.items]
        not_confirmed = [i.item_id for i in matched if i.state != CONFIRMED]
        if not_confirmed:
            raise CommitRejected("items not in state Confirmed", not_confirmed)
    blocked = []
    for item in plan.items:
        if item.category in VERIFIER_GATED:
            probe = PIICandidate("probe", item.category, item.value, item.locations, 1.0)
            if verify_format(probe) != VERIFIER_PASSED:
                blocked.append(item.candidate_id)
    if blocked:
        raise CommitRejected("verify_format failed for redaction-gated items", blocked)

    audit.append(plan.operator_id, "PlanIssued", {"doc_id": plan.doc_id, "plan": plan.to_payload(),
                                                  "plan_digest": plan.digest()})
    try:
        result = apply_redactions(bundle, plan)
    except ScrubFailed as failure:
        audit.append(
            plan.operator_id,
            "ScrubFailed",
            {"doc_id": plan.doc_id, "plan_digest": plan.digest(),
             "residues": [
                 {"kind": r.kind, "page_index": r.page_index,
                  "bbox": [r.bbox.x, r.bbox.y, r.bbox.w, r.bbox.h]}
                 for r in failure.report.residues
             ]},
        )
        raise
    audit.append(
        plan.operator_id,
        "RedactionApplied",
        {"doc_id": plan.doc_id,
         "coordinates": [
             {"candidate_id": item.candidate_id, "page_index": loc.page_index,
              "bbox": [loc.bbox.x, loc.bbox.y, loc.bbox.w, loc.bbox.h]}
             for item in plan.items for loc in item.locations
         ]},
    )
    audit.append(plan.operator_id, "ScrubPassed", {"doc_id": plan.doc_id, "plan_digest": plan.digest()})
    audit.append(plan.operator_id, "FinalHash", {"doc_id": plan.doc_id, "final_hash": result.final_hash})

    committed = tuple(
        transition(item, "commit", plan.operator_id, audit=audit) for item in matched
    )
    return replace(result, committed_items=committed)
