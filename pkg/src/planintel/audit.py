"""Append-only, hash-chained audit log with a redundant head anchor for truncation detection."""

from __future__ import annotations

import hashlib
import json
import os
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterator

GENESIS = "0" * 64
LOG_NAME = "audit.log"
HEAD_NAME = "audit.head"

# Persisted line layout; order is part of the on-disk contract.
_FIELD_ORDER = ("seq", "ts", "actor", "action", "payload_digest", "prev_hash", "event_hash", "payload")


class AuditStorageError(RuntimeError):
    """Append could not be made durable."""


def canonical_payload(payload: dict[str, Any]) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=True).encode("utf-8")


def payload_digest(payload: dict[str, Any]) -> str:
    return hashlib.sha256(canonical_payload(payload)).hexdigest()


def event_hash(seq: int, ts: str, actor: str, action: str, digest: str, prev_hash: str) -> str:
    material = f"{seq}\n{ts}\n{actor}\n{action}\n{digest}\n{prev_hash}".encode("utf-8")
    return hashlib.sha256(material).hexdigest()


@dataclass(frozen=True)
class AuditEvent:
    """One chained record; event_hash covers every field except the stored payload body."""

    seq: int
    ts: str
    actor: str
    action: str
    payload_digest: str
    prev_hash: str
    event_hash: str
    payload: dict[str, Any]

    def to_line(self) -> str:
        record = {name: getattr(self, name) for name in _FIELD_ORDER}
        return json.dumps(record, sort_keys=False, separators=(",", ":"), ensure_ascii=True)


@dataclass
class ChainReport:
    """Outcome of verify_chain."""

    valid: bool
    checked: int
    first_invalid_seq: int | None = None
    truncated: bool = False
    problems: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.valid and not self.truncated


def _utc_now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


class AuditLog:
    """Single-writer append log; any number of readers see a consistent prefix."""

    def __init__(self, directory: str | Path):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.log_path = self.dir / LOG_NAME
        self.head_path = self.dir / HEAD_NAME
        self._lock = threading.Lock()
        self._next_seq = 0
        self._last_hash = GENESIS
        self._recover()

    def _recover(self) -> None:
        # Tolerates a damaged log: recovery never repairs anything, it only
        # positions the writer so verify_chain can still pinpoint the break.
        if not self.log_path.exists():
            return
        lines = 0
        last_seq = -1
        last_hash = GENESIS
        with self.log_path.open("r", encoding="utf-8", errors="replace") as fh:
            for line in fh:
                line = line.strip("\r\n")
                if not line:
                    continue
                lines += 1
                try:
                    record = json.loads(line)
                    last_seq = int(record["seq"])
                    last_hash = str(record["event_hash"])
                except (ValueError, KeyError, TypeError):
                    continue
        self._next_seq = max(lines, last_seq + 1)
        self._last_hash = last_hash

    def append(self, actor: str, action: str, payload: dict[str, Any]) -> AuditEvent:
        """Append one event; durable (flushed and fsynced) before return."""
        with self._lock:
            seq = self._next_seq
            ts = _utc_now()
            digest = payload_digest(payload)
            ehash = event_hash(seq, ts, actor, action, digest, self._last_hash)
            event = AuditEvent(seq, ts, actor, action, digest, self._last_hash, ehash, payload)
            try:
                with self.log_path.open("a", encoding="utf-8") as fh:
                    fh.write(event.to_line() + "\n")
                    fh.flush()
                    os.fsync(fh.fileno())
                tmp = self.head_path.with_suffix(".tmp")
                tmp.write_text(f"{seq} {ehash}\n", encoding="utf-8")
                os.replace(tmp, self.head_path)
            except OSError as exc:
                raise AuditStorageError(f"append not acknowledged: {exc}") from exc
            self._next_seq = seq + 1
            self._last_hash = ehash
            return event

    def events(self) -> Iterator[AuditEvent]:
        if not self.log_path.exists():
            return
        with self.log_path.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip("\r\n")
                if not line:
                    continue
                record = json.loads(line)
                yield AuditEvent(**{name: record[name] for name in _FIELD_ORDER})

    def __len__(self) -> int:
        return sum(1 for _ in self.events())

    def head_anchor(self) -> tuple[int, str] | None:
        if not self.head_path.exists():
            return None
        seq_text, ehash = self.head_path.read_text(encoding="utf-8").split()
        return int(seq_text), ehash

    def verify_chain(self) -> ChainReport:
        """Recompute every event hash and linkage; report the first break, if any."""
        problems: list[str] = []
        first_invalid: int | None = None
        prev_hash = GENESIS
        expected_seq = 0
        checked = 0
        last_hash = None
        if self.log_path.exists():
            with self.log_path.open("r", encoding="utf-8", errors="replace") as fh:
                for lineno, line in enumerate(fh):
                    line = line.strip("\r\n")
                    if not line:
                        continue
                    try:
                        record = json.loads(line)
                        event = AuditEvent(**{name: record[name] for name in _FIELD_ORDER})
                    except (ValueError, KeyError, TypeError):
                        problems.append(f"line {lineno}: unreadable record")
                        first_invalid = first_invalid if first_invalid is not None else expected_seq
                        break
                    fault = None
                    if event.seq != expected_seq:
                        fault = f"seq {event.seq}, expected {expected_seq}"
                    elif event.prev_hash != prev_hash:
                        fault = "prev_hash does not chain"
                    elif payload_digest(event.payload) != event.payload_digest:
                        fault = "payload does not match its digest"
                    elif event_hash(
                        event.seq, event.ts, event.actor, event.action, event.payload_digest, event.prev_hash
                    ) != event.event_hash:
                        fault = "event_hash does not recompute"
                    if fault:
                        problems.append(f"event {expected_seq}: {fault}")
                        first_invalid = expected_seq
                        break
                    prev_hash = event.event_hash
                    last_hash = event.event_hash
                    expected_seq += 1
                    checked += 1
        valid = first_invalid is None and not problems
        truncated = False
        anchor = self.head_anchor()
        if valid and anchor is not None:
            anchor_seq, anchor_hash = anchor
            if checked == 0 or anchor_seq != checked - 1 or anchor_hash != last_hash:
                truncated = True
                problems.append(
                    f"head anchor records seq {anchor_seq}, log ends at {checked - 1 if checked else 'empty'}"
                )
        return ChainReport(valid=valid, checked=checked, first_invalid_seq=first_invalid,
                           truncated=truncated, problems=problems)

    def query(
        self,
        doc_id: str | None = None,
        action: str | None = None,
        actor: str | None = None,
        seq_range: tuple[int, int] | None = None,
    ) -> list[AuditEvent]:
        """Events matching every given filter, in seq order. seq_range is inclusive."""
        out = []
        for event in self.events():
            if doc_id is not None and event.payload.get("doc_id") != doc_id:
                continue
            if action is not None and event.action != action:
                continue
            if actor is not None and event.actor != actor:
                continue
            if seq_range is not None and not (seq_range[0] <= event.seq <= seq_range[1]):
                continue
            out.append(event)
        return out


__all__ = [
    "GENESIS",
    "AuditEvent",
    "AuditLog",
    "AuditStorageError",
    "ChainReport",
    "canonical_payload",
    "event_hash",
    "payload_digest",
]
