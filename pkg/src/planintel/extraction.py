"""Metadata field suggestions: parse validated provider output and normalize values."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

FIELD_KINDS = ("free_text", "date", "scale")

# Suggestion statuses: "ok" means the value is in canonical form.
STATUS_OK = "ok"
STATUS_UNPARSEABLE = "unparseable"
STATUS_MISSING = "missing_required"

# Unparseable values stay in the queue with confidence capped so they review early.
UNPARSEABLE_CONFIDENCE_CAP = 0.5


class UnparseableValue(ValueError):
    """The raw text does not parse under the field's grammar."""


@dataclass(frozen=True)
class SchemaField:
    name: str
    kind: str
    required: bool = False

    def __post_init__(self) -> None:
        if self.kind not in FIELD_KINDS:
            raise ValueError(f"unknown field kind {self.kind!r}")


@dataclass(frozen=True)
class MetadataSchema:
    fields: tuple[SchemaField, ...]

    def __post_init__(self) -> None:
        names = [f.name for f in self.fields]
        if len(names) != len(set(names)):
            raise ValueError("schema field names must be unique")

    def field_named(self, name: str) -> SchemaField:
        for f in self.fields:
            if f.name == name:
                return f
        raise KeyError(name)


@dataclass(frozen=True)
class FieldSuggestion:
    """An AI-proposed metadata value; never self-committing."""

    field_name: str
    value: str
    raw_value: str
    confidence: float
    source_spans: tuple[str, ...] = ()
    status: str = STATUS_OK

    def __post_init__(self) -> None:
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence {self.confidence} outside [0,1]")
        if self.confidence > 0 and not self.value:
            raise ValueError("suggestions with positive confidence must carry a value")


def load_metadata_schema(path: str | Path) -> MetadataSchema:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    return MetadataSchema(
        tuple(SchemaField(f["name"], f["kind"], bool(f.get("required", False))) for f in raw["fields"])
    )


_MONTHS = {
    "jan": 1, "feb": 2, "mar": 3, "apr": 4, "may": 5, "jun": 6,
    "jul": 7, "aug": 8, "sep": 9, "sept": 9, "oct": 10, "nov": 11, "dec": 12,
}

_ISO_RE = re.compile(r"^(\d{4})-(\d{2})-(\d{2})$")
_NUMERIC_RE = re.compile(r"^(\d{1,2})[/.\-](\d{1,2})[/.\-](\d{4})$")
_DAY_FIRST_NAME_RE = re.compile(r"^(\d{1,2})(?:st|nd|rd|th)?\s+([A-Za-z]+),?\s+(\d{4})$")
_NAME_FIRST_RE = re.compile(r"^([A-Za-z]+)\s+(\d{1,2})(?:st|nd|rd|th)?,?\s+(\d{4})$")


def _month_number(name: str) -> int:
    key = name.lower().rstrip(".")
    num = _MONTHS.get(key[:4]) or _MONTHS.get(key[:3])
    if num is None:
        raise UnparseableValue(f"unknown month name {name!r}")
    return num


def normalize_date(text: str) -> str:
    """Normalize day-first numeric, month-name, or ISO dates to YYYY-MM-DD."""
    cleaned = " ".join(text.strip().split())
    m = _ISO_RE.match(cleaned)
    if m:
        year, month, day = int(m.group(1)), int(m.group(2)), int(m.group(3))
    else:
        m = _NUMERIC_RE.match(cleaned)
        if m:
            # ambiguous all-numeric dates read day-first (UK convention)
            day, month, year = int(m.group(1)), int(m.group(2)), int(m.group(3))
        else:
            m = _DAY_FIRST_NAME_RE.match(cleaned)
            if m:
                day, month, year = int(m.group(1)), _month_number(m.group(2)), int(m.group(3))
            else:
                m = _NAME_FIRST_RE.match(cleaned)
                if m:
                    month, day, year = _month_number(m.group(1)), int(m.group(2)), int(m.group(3))
                else:
                    raise UnparseableValue(f"unrecognized date {text!r}")
    try:
        return date(year, month, day).isoformat()
    except ValueError as exc:
        raise UnparseableValue(f"invalid calendar date {text!r}") from exc


_SCALE_RE = re.compile(r"^(?:scale\b[\s:]*)?1\s*[:/]\s*0*([1-9]\d*)\s*$", re.IGNORECASE)


def normalize_scale(text: str) -> str:
    """Normalize scale variants ("1 : 1250", "1/1250", "Scale 1:1250") to "1:N"."""
    m = _SCALE_RE.match(text.strip())
    if not m:
        raise UnparseableValue(f"unrecognized scale {text!r}")
    return f"1:{int(m.group(1))}"


def _normalize_for_kind(kind: str, raw: str) -> str:
    if kind == "date":
        return normalize_date(raw)
    if kind == "scale":
        return normalize_scale(raw)
    return " ".join(raw.strip().split())


def parse_suggestions(raw: dict, schema: MetadataSchema) -> list[FieldSuggestion]:
    """One suggestion per schema field present in the validated payload.

    Missing required fields yield a zero-confidence placeholder; values the
    normalizer rejects are kept verbatim, flagged, and capped in confidence.
    """
    provided = raw.get("fields", {})
    suggestions: list[FieldSuggestion] = []
    for schema_field in schema.fields:
        entry = provided.get(schema_field.name)
        if entry is None:
            if schema_field.required:
                suggestions.append(
                    FieldSuggestion(schema_field.name, "", "", 0.0, (), STATUS_MISSING)
                )
            continue
        if isinstance(entry, str):
            raw_value, confidence, spans = entry, 1.0, ()
        else:
            raw_value = str(entry.get("value", ""))
            confidence = float(entry.get("confidence", 1.0))
            spans = tuple(entry.get("source_spans", ()))
        if not raw_value:
            if schema_field.required:
                suggestions.append(
                    FieldSuggestion(schema_field.name, "", "", 0.0, spans, STATUS_MISSING)
                )
            continue
        try:
            value = _normalize_for_kind(schema_field.kind, raw_value)
            status = STATUS_OK
        except UnparseableValue:
            value = raw_value
            status = STATUS_UNPARSEABLE
            confidence = min(confidence, UNPARSEABLE_CONFIDENCE_CAP)
        suggestions.append(FieldSuggestion(schema_field.name, value, raw_value, confidence, spans, status))
    return suggestions


__all__ = [
    "FIELD_KINDS",
    "FieldSuggestion",
    "MetadataSchema",
    "STATUS_MISSING",
    "STATUS_OK",
    "STATUS_UNPARSEABLE",
    "SchemaField",
    "UnparseableValue",
    "load_metadata_schema",
    "normalize_date",
    "normalize_scale",
    "parse_suggestions",
]
