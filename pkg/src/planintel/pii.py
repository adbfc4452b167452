"""PII candidates: detection post-processing, format verifiers, and deduplication."""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from functools import lru_cache

from .audit import AuditLog
from .datafiles import data_path, read_lexicon
from .docmodel import BoundingBox, DocumentBundle, find_occurrence_regions

CATEGORIES = ("Names", "Addresses", "Emails", "Phones", "Signatures")
TEXT_CATEGORIES = ("Names", "Addresses", "Emails", "Phones")

VERIFIER_NOT_APPLICABLE = "not_applicable"
VERIFIER_PASSED = "passed"
VERIFIER_FAILED = "failed"

# Categories whose redaction commit is blocked unless the verifier passed.
VERIFIER_GATED = ("Emails", "Phones")

DEDUPE_IOU = 0.5


@dataclass(frozen=True)
class Location:
    """Where a candidate lives: a page region, optionally tied to a span."""

    page_index: int
    bbox: BoundingBox
    span_id: str | None = None

    def sort_key(self) -> tuple:
        return (self.page_index, self.bbox.x, self.bbox.y, self.bbox.w, self.bbox.h, self.span_id or "")


@dataclass(frozen=True)
class PIICandidate:
    """An AI-proposed PII instance awaiting human review."""

    candidate_id: str
    category: str
    value: str
    locations: tuple[Location, ...]
    confidence: float
    verifier_status: str = VERIFIER_NOT_APPLICABLE

    def __post_init__(self) -> None:
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown PII category {self.category!r}")
        if not self.locations:
            raise ValueError("a candidate needs at least one location")
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence {self.confidence} outside [0,1]")
        if self.category == "Signatures":
            if self.value:
                raise ValueError("Signatures candidates carry no text value")
            if any(loc.span_id is not None for loc in self.locations):
                raise ValueError("Signatures candidates carry bbox locations only")


@dataclass(frozen=True)
class CandidateDraft:
    """Provider-claimed PII item before anchoring against the bundle."""

    category: str
    value: str
    confidence: float
    page_index: int | None = None
    bbox: BoundingBox | None = None


# ---------------------------------------------------------------------------
# Format verifiers (pure, reproducible)

_EMAIL_LOCAL = r"[A-Za-z0-9](?:\.?[A-Za-z0-9_%+\-]+)*"
_EMAIL_LABEL = r"[A-Za-z0-9](?:[A-Za-z0-9\-]*[A-Za-z0-9])?"
_EMAIL_RE = re.compile(rf"^{_EMAIL_LOCAL}@(?:{_EMAIL_LABEL}\.)+[A-Za-z]{{2,}}$")

# Outward code A9 / A99 / AA9 / AA99 with optional trailing letter, inward 9AA.
_POSTCODE = r"[A-Za-z]{1,2}\d{1,2}[A-Za-z]?\s*\d[A-Za-z]{2}"
_POSTCODE_RE = re.compile(rf"\b{_POSTCODE}\b")

_PHONE_CHARS_RE = re.compile(r"^\+?[\d\s()\-]+$")


@lru_cache(maxsize=1)
def street_suffixes() -> tuple[str, ...]:
    return tuple(read_lexicon("street_suffixes.txt"))


@lru_cache(maxsize=1)
def _street_re() -> re.Pattern:
    suffix = "|".join(re.escape(s) for s in street_suffixes())
    return re.compile(
        rf"\b\d+[A-Za-z]?\s+(?:[A-Za-z'][A-Za-z'\-]*\s+){{0,3}}(?:{suffix})\b",
        re.IGNORECASE,
    )


def email_ok(value: str) -> bool:
    return bool(_EMAIL_RE.match(value.strip()))


def normalize_phone(value: str) -> str | None:
    """National significant number after trunk normalization, or None if ill-formed."""
    text = value.strip()
    if not text or not _PHONE_CHARS_RE.match(text):
        return None
    if text.count("+") > 1 or ("+" in text and not text.startswith("+")):
        return None
    digits = re.sub(r"\D", "", text)
    if text.startswith("+"):
        if not digits.startswith("44"):
            return None
        nsn = digits[2:]
        if nsn.startswith("0"):  # written "+44 (0)20 ..."
            nsn = nsn[1:]
    elif digits.startswith("0"):
        nsn = digits[1:]
    else:
        return None
    if len(nsn) not in (9, 10) or not nsn or nsn[0] == "0":
        return None
    return nsn


def phone_ok(value: str) -> bool:
    return normalize_phone(value) is not None


def postcode_ok(value: str) -> bool:
    """Whole string is one valid-format UK postcode."""
    return bool(re.fullmatch(_POSTCODE, value.strip()))


def address_ok(value: str) -> bool:
    """UK postcode present, or a street-number + lexicon street-suffix pattern."""
    return bool(_POSTCODE_RE.search(value) or _street_re().search(value))


VERIFIERS = {"emails": email_ok, "phones": phone_ok, "postcodes": postcode_ok}


def load_verifier_corpus(name: str) -> list[tuple[str, bool]]:
    """Curated (value, expected) pairs; lines are `pos<TAB>value` or `neg<TAB>value`."""
    pairs = []
    text = data_path("verifier_corpus", f"{name}.txt").read_text(encoding="utf-8")
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        label, _, value = line.partition("\t")
        if label not in ("pos", "neg"):
            raise ValueError(f"bad corpus label {label!r} in {name}")
        pairs.append((value, label == "pos"))
    return pairs


def verify_format(candidate: PIICandidate) -> str:
    """Deterministic per-category format check; Names and Signatures are exempt."""
    if candidate.category in ("Names", "Signatures"):
        return VERIFIER_NOT_APPLICABLE
    if candidate.category == "Emails":
        ok = email_ok(candidate.value)
    elif candidate.category == "Phones":
        ok = phone_ok(candidate.value)
    else:
        ok = address_ok(candidate.value)
    return VERIFIER_PASSED if ok else VERIFIER_FAILED


def with_verifier_status(candidate: PIICandidate) -> PIICandidate:
    return replace(candidate, verifier_status=verify_format(candidate))


# ---------------------------------------------------------------------------
# Text scanners (shared with the classical baseline)

_EMAIL_SCAN_RE = re.compile(
    rf"(?<![A-Za-z0-9._%+\-])({_EMAIL_LOCAL}@(?:{_EMAIL_LABEL}\.)+[A-Za-z]{{2,}})(?![A-Za-z0-9\-])"
)
_PHONE_SCAN_RE = re.compile(r"(?<![\d+])(\+44[\s\-]?\(?0?\)?[\d\s()\-]{8,14}\d|0\d{2,4}[\s\-]?[\d\s\-]{5,10}\d)")


def scan_emails(text: str) -> list[tuple[int, int, str]]:
    out = []
    for m in _EMAIL_SCAN_RE.finditer(text):
        if email_ok(m.group(1)):
            out.append((m.start(1), m.end(1), m.group(1)))
    return out


def scan_phones(text: str) -> list[tuple[int, int, str]]:
    out = []
    for m in _PHONE_SCAN_RE.finditer(text):
        if phone_ok(m.group(1)):
            out.append((m.start(1), m.end(1), m.group(1)))
    return out


def scan_postcodes(text: str) -> list[tuple[int, int, str]]:
    return [(m.start(), m.end(), m.group(0)) for m in _POSTCODE_RE.finditer(text)]


def scan_street_addresses(text: str) -> list[tuple[int, int, str]]:
    return [(m.start(), m.end(), m.group(0)) for m in _street_re().finditer(text)]


# ---------------------------------------------------------------------------
# Normalization and dedupe

def normalize_value(category: str, value: str) -> str:
    if category == "Emails":
        return value.strip().casefold()
    if category == "Phones":
        return normalize_phone(value) or re.sub(r"\D", "", value)
    return " ".join(value.casefold().split())


def _locations_overlap(a: PIICandidate, b: PIICandidate) -> bool:
    for la in a.locations:
        for lb in b.locations:
            if la.page_index == lb.page_index and la.bbox.iou(lb.bbox) > DEDUPE_IOU:
                return True
    return False


def dedupe(candidates: list[PIICandidate]) -> list[PIICandidate]:
    """Merge same-category, same-normalized-value candidates whose locations overlap."""
    n = len(candidates)
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    norms = [normalize_value(c.category, c.value) for c in candidates]
    for i in range(n):
        for j in range(i + 1, n):
            if (
                candidates[i].category == candidates[j].category
                and norms[i] == norms[j]
                and _locations_overlap(candidates[i], candidates[j])
            ):
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[rj] = ri
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    merged: list[PIICandidate] = []
    for members in groups.values():
        group = [candidates[i] for i in members]
        locations = tuple(sorted({loc for c in group for loc in c.locations}, key=Location.sort_key))
        best = max(group, key=lambda c: c.confidence)
        merged.append(
            with_verifier_status(
                replace(best, locations=locations, confidence=max(c.confidence for c in group))
            )
        )
    merged.sort(key=lambda c: (c.category, normalize_value(c.category, c.value),
                               c.locations[0].sort_key()))
    return [replace(c, candidate_id=f"pii-{i:04d}") for i, c in enumerate(merged)]


# ---------------------------------------------------------------------------
# Detection

def parse_candidate_drafts(payload: dict) -> list[CandidateDraft]:
    """Schema-validated provider payload to drafts; shape errors were caught upstream."""
    drafts = []
    for item in payload.get("candidates", []):
        bbox = None
        if item.get("bbox") is not None:
            x, y, w, h = item["bbox"]
            bbox = BoundingBox(int(x), int(y), int(w), int(h))
        drafts.append(
            CandidateDraft(
                category=item["category"],
                value=str(item.get("value", "")),
                confidence=float(item.get("confidence", 1.0)),
                page_index=item.get("page_index"),
                bbox=bbox,
            )
        )
    return drafts


def anchor_drafts(
    bundle: DocumentBundle,
    drafts: list[CandidateDraft],
    audit: AuditLog | None = None,
) -> list[PIICandidate]:
    """Anchor claimed values to actual bundle text; unanchorable claims are dropped and audited."""
    anchored: list[PIICandidate] = []
    counter = 0
    for draft in drafts:
        if draft.category == "Signatures":
            page_ok = draft.page_index is not None and 0 <= draft.page_index < len(bundle.pages)
            if not page_ok or draft.bbox is None or not bundle.pages[draft.page_index].extent().contains(draft.bbox):
                if audit is not None:
                    audit.append(
                        "system",
                        "pii_hallucination_filtered",
                        {"doc_id": bundle.doc_id, "category": draft.category,
                         "reason": "signature bbox does not resolve on any page"},
                    )
                continue
            anchored.append(
                PIICandidate(
                    candidate_id=f"draft-{counter:04d}",
                    category="Signatures",
                    value="",
                    locations=(Location(draft.page_index, draft.bbox),),
                    confidence=draft.confidence,
                )
            )
            counter += 1
            continue
        occurrences = find_occurrence_regions(bundle, draft.value) if draft.value else []
        if not occurrences:
            if audit is not None:
                audit.append(
                    "system",
                    "pii_hallucination_filtered",
                    {"doc_id": bundle.doc_id, "category": draft.category, "value": draft.value,
                     "reason": "claimed value not present in bundle text"},
                )
            continue
        for occ in occurrences:
            locations = tuple(
                Location(occ.page_index, frag.bbox, frag.span_id) for frag in occ.fragments
            )
            anchored.append(
                PIICandidate(
                    candidate_id=f"draft-{counter:04d}",
                    category=draft.category,
                    value=draft.value,
                    locations=locations,
                    confidence=draft.confidence,
                )
            )
            counter += 1
    return anchored


def detect_pii(bundle, config, provider, audit) -> list:
    """Run the detection pipeline, then anchor, verify, and dedupe the claims."""
    from .pipeline import run_task  # local import; pipeline dispatches back into this module

    if config.task_kind != "pii_detection":
        raise ValueError(f"config is for {config.task_kind!r}, expected pii_detection")
    result = run_task(bundle, config, provider, audit)
    anchored = anchor_drafts(bundle, result.suggestions, audit)
    return dedupe([with_verifier_status(c) for c in anchored])


__all__ = [
    "CATEGORIES",
    "CandidateDraft",
    "DEDUPE_IOU",
    "Location",
    "PIICandidate",
    "TEXT_CATEGORIES",
    "VERIFIER_FAILED",
    "VERIFIER_GATED",
    "VERIFIER_NOT_APPLICABLE",
    "VERIFIER_PASSED",
    "VERIFIERS",
    "address_ok",
    "anchor_drafts",
    "dedupe",
    "detect_pii",
    "email_ok",
    "load_verifier_corpus",
    "normalize_phone",
    "normalize_value",
    "parse_candidate_drafts",
    "phone_ok",
    "postcode_ok",
    "scan_emails",
    "scan_phones",
    "scan_postcodes",
    "scan_street_addresses",
    "street_suffixes",
    "verify_format",
    "with_verifier_status",
]
