"""Rule and lexicon taggers: the classical arm of the comparison harness.

No model calls anywhere in this module — every prediction is derived from
grammars, lexicons, and layout position, so the comparison against the
pipeline arm is a like-for-like "rules vs suggested" contrast.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache

from ..datafiles import read_lexicon
from ..docmodel import DocumentBundle, char_box, span_char_offsets
from ..extraction import UnparseableValue, normalize_date
from ..pii import Location, PIICandidate, address_ok, scan_emails, scan_phones

TOP_BAND_FRACTION = 0.2  # "largest heading" proxy: widest span starting in the top fifth


@dataclass(frozen=True)
class BaselinePredictions:
    doc_id: str
    field_spans: dict[str, list[tuple[int, int]]]  # char intervals into document_text
    field_values: dict[str, list[str]]
    pii: tuple[PIICandidate, ...]


@lru_cache(maxsize=1)
def _first_names() -> frozenset[str]:
    return frozenset(read_lexicon("first_names.txt"))


_NAME_RE = re.compile(r"^[A-Z][a-z]+ [A-Z][a-z]+$")

# Date shapes the scanner recognises; each hit is still validated by the
# shared date normalizer so "99 March 2024" never survives.
_DATE_SCAN_RE = re.compile(
    r"\b(\d{1,2}(?:st|nd|rd|th)?\s+[A-Z][a-z]+,?\s+\d{4}"
    r"|\d{1,2}[/.\-]\d{1,2}[/.\-]\d{4}"
    r"|\d{4}-\d{2}-\d{2})\b"
)


def scan_dates(text: str) -> list[tuple[int, int, str]]:
    """(start, end, normalized) for every substring that parses as a date."""
    out = []
    for m in _DATE_SCAN_RE.finditer(text):
        try:
            normalized = normalize_date(m.group(1))
        except UnparseableValue:
            continue
        out.append((m.start(1), m.end(1), normalized))
    return out


def looks_like_name(text: str) -> bool:
    if not _NAME_RE.match(text):
        return False
    return text.split()[0] in _first_names()


def baseline_ner(bundle: DocumentBundle) -> BaselinePredictions:
    """Field and PII predictions from rules alone.

    Title: the widest span starting in the top band of page 0.  Date: every
    date-shaped string in the document (a regex scanner cannot tell the
    decision date from a print footer, so it predicts them all).  PII: the
    verifier grammars run as scanners, plus lexicon lookups for names and
    address lines.
    """
    offsets = span_char_offsets(bundle)
    field_spans: dict[str, list[tuple[int, int]]] = {"Title": [], "Date": []}
    field_values: dict[str, list[str]] = {"Title": [], "Date": []}
    pii: list[PIICandidate] = []

    def add_pii(category: str, value: str, location: Location) -> None:
        pii.append(
            PIICandidate(f"base-{len(pii):04d}", category, value, (location,), 1.0)
        )

    if bundle.pages:
        first = bundle.pages[0]
        band = first.height * TOP_BAND_FRACTION
        contenders = [s for s in first.spans if s.bbox.y < band]
        if contenders:
            title = max(contenders, key=lambda s: (s.bbox.w, -s.bbox.y, -s.bbox.x))
            field_spans["Title"].append(offsets[title.span_id])
            field_values["Title"].append(title.text)

    for span in bundle.all_spans():
        base = offsets[span.span_id][0]
        for start, end, normalized in scan_dates(span.text):
            field_spans["Date"].append((base + start, base + end))
            field_values["Date"].append(normalized)
        whole = Location(span.page_index, span.bbox, span.span_id)
        if looks_like_name(span.text):
            add_pii("Names", span.text, whole)
        if address_ok(span.text):
            add_pii("Addresses", span.text, whole)
        for start, end, value in scan_emails(span.text):
            add_pii("Emails", value, Location(span.page_index, char_box(span, start, end), span.span_id))
        for start, end, value in scan_phones(span.text):
            add_pii("Phones", value, Location(span.page_index, char_box(span, start, end), span.span_id))

    return BaselinePredictions(bundle.doc_id, field_spans, field_values, tuple(pii))
