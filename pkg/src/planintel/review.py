"""Review state machine: AI output is a suggestion until a human commits it."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Any

from .audit import AuditLog

SUGGESTED = "Suggested"
CONFIRMED = "Confirmed"
REJECTED = "Rejected"
EDITED = "Edited"
COMMITTED = "Committed"

STATES = (SUGGESTED, CONFIRMED, REJECTED, EDITED, COMMITTED)
ACTIONS = ("confirm", "reject", "edit", "commit")

# action legality per current state; commit is reachable only via Confirmed or Edited,
# so no item can be committed without a prior human decision.
_TRANSITIONS: dict[tuple[str, str], str] = {
    (SUGGESTED, "confirm"): CONFIRMED,
    (SUGGESTED, "reject"): REJECTED,
    (SUGGESTED, "edit"): EDITED,
    (CONFIRMED, "reject"): REJECTED,
    (CONFIRMED, "edit"): EDITED,
    (CONFIRMED, "commit"): COMMITTED,
    (EDITED, "reject"): REJECTED,
    (EDITED, "commit"): COMMITTED,
}

# Fixed tie-break rank for equal-confidence PII items; higher risk reviews first.
CATEGORY_RISK_RANK = {"Names": 0, "Addresses": 1, "Phones": 2, "Emails": 3, "Signatures": 4}


class IllegalTransition(ValueError):
    """The requested action is not legal from the item's current state."""


@dataclass(frozen=True)
class HistoryEntry:
    state: str
    operator_id: str
    action: str
    at: str


@dataclass(frozen=True)
class ReviewItem:
    """One suggestion under review, with its full transition history."""

    item_id: str
    doc_id: str
    payload: Any
    state: str = SUGGESTED
    operator_id: str | None = None
    edited_value: str | None = None
    history: tuple[HistoryEntry, ...] = field(default_factory=tuple)

    @property
    def terminal(self) -> bool:
        return self.state in (REJECTED, COMMITTED)

    @property
    def was_edited(self) -> bool:
        return any(entry.action == "edit" for entry in self.history)


@dataclass(frozen=True)
class ReviewQueue:
    doc_id: str
    item_ids: tuple[str, ...]


def _utc_now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def transition(
    item: ReviewItem,
    action: str,
    operator_id: str,
    value: str | None = None,
    audit: AuditLog | None = None,
) -> ReviewItem:
    """Apply one operator action; returns the new item and appends one audit event."""
    if action not in ACTIONS:
        raise IllegalTransition(f"unknown action {action!r}")
    if not operator_id:
        raise IllegalTransition("operator_id is required for every transition")
    new_state = _TRANSITIONS.get((item.state, action))
    if new_state is None:
        raise IllegalTransition(f"{action} is not legal from {item.state}")
    if action == "edit" and not value:
        raise IllegalTransition("edit requires a replacement value")
    entry = HistoryEntry(new_state, operator_id, action, _utc_now())
    if action == "edit":
        edited_value = value
    elif action == "reject":
        edited_value = None  # a rejected edit is discarded
    else:
        edited_value = item.edited_value
    updated = replace(
        item,
        state=new_state,
        operator_id=operator_id,
        edited_value=edited_value,
        history=item.history + (entry,),
    )
    if audit is not None:
        audit.append(
            operator_id,
            f"review_{action}",
            {
                "doc_id": item.doc_id,
                "item_id": item.item_id,
                "from_state": item.state,
                "to_state": new_state,
                "edited_value": value,
            },
        )
    return updated


def _priority_key(index: int, item: ReviewItem) -> tuple:
    payload = item.payload
    confidence = getattr(payload, "confidence", None)
    if confidence is not None:
        category = getattr(payload, "category", None)
        risk = CATEGORY_RISK_RANK.get(category, -1)
        # ascending confidence, then higher risk first, then item_id
        return (0, float(confidence), -risk, item.item_id)
    # RuleOutcomes carry no confidence: unsatisfied first, then original (rule) order.
    satisfied = bool(getattr(payload, "satisfied", False))
    return (1, 0 if not satisfied else 1, index, item.item_id)


def prioritize(items: list[ReviewItem]) -> ReviewQueue:
    """Order items for review: least-confident and highest-risk first."""
    doc_id = items[0].doc_id if items else ""
    ranked = sorted(enumerate(items), key=lambda pair: _priority_key(pair[0], pair[1]))
    return ReviewQueue(doc_id, tuple(item.item_id for _, item in ranked))


def acceptance_rate(items: list[ReviewItem]) -> float | None:
    """Fraction of resolved items accepted as suggested; edits count against. None when nothing resolved."""
    resolved = [item for item in items if item.state != SUGGESTED]
    if not resolved:
        return None
    accepted = sum(
        1
        for item in resolved
        if item.state in (CONFIRMED, COMMITTED) and not item.was_edited
    )
    return accepted / len(resolved)


__all__ = [
    "ACTIONS",
    "CATEGORY_RISK_RANK",
    "COMMITTED",
    "CONFIRMED",
    "EDITED",
    "HistoryEntry",
    "IllegalTransition",
    "REJECTED",
    "ReviewItem",
    "ReviewQueue",
    "STATES",
    "SUGGESTED",
    "acceptance_rate",
    "prioritize",
    "transition",
]
