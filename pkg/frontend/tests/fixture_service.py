"""Stand up a seeded review service for the frontend test suite.

Usage: python3 fixture_service.py WORKDIR

Seeds a handful of documents through the public API (never by reaching into
the store), prints ``READY <port>`` once seeding is done, then serves until
killed. Each document exercises one workflow:

    ui-ext-001   field verification (edit + save)
    ui-pii-001   PII confirm list (select 2 of 3, commit)
    ui-vis-001   visual checks (provider and classical)
    ui-inv-001   gesture and conflict invariants
    ui-blk-001   extra candidate whose format verifier fails
    ui-fail-001  visual detection scripted to die on the wire
"""

import io
import json
import socket
import sys
import zipfile
from pathlib import Path

import numpy as np
import uvicorn
from fastapi.testclient import TestClient

from planintel.docmodel import BoundingBox, DocumentBundle, Page, TextSpan, save_bundle
from planintel.providers import MockProvider
from planintel.service import create_app

OPERATOR = "seed-bot"

TEXTS = [
    "Outline Plan for Land at Mill Lane",
    "Date: 14 March 2024",
    "Scale 1:1250",
    "Grace Hopper",
    "grace.hopper@example.org",
    "01632 960123",
    "Ref: 12345",
]

TASKS_BY_DOC = {
    "ui-ext-001": ("extraction", "pii_detection"),
    "ui-pii-001": ("extraction", "pii_detection"),
    "ui-vis-001": (),
    "ui-inv-001": ("extraction", "pii_detection"),
    "ui-blk-001": ("pii_detection",),
    "ui-fail-001": (),
}


def make_bundle(doc_id):
    spans = []
    for row, text in enumerate(TEXTS):
        bbox = BoundingBox(10, 12 + row * 30, max(8, 7 * len(text)), 18)
        spans.append(TextSpan(f"s0-{row}", text, 0, bbox))
    image = np.full((320, 420), 255, dtype=np.uint8)
    page = Page(0, 420, 320, image, spans)
    return DocumentBundle(doc_id, [page], {"source": "ui-fixture"}, provenance="fixture")


def zip_bundle(bundle, scratch):
    src = scratch / f"zip-{bundle.doc_id}"
    save_bundle(bundle, src)
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as archive:
        for path in sorted(src.rglob("*")):
            if path.is_file():
                archive.write(path, path.relative_to(src))
    return buf.getvalue()


def candidate(category, value, confidence, row):
    return {
        "category": category,
        "value": value,
        "confidence": confidence,
        "page_index": 0,
        "bbox": [10, 12 + row * 30, max(8, 7 * len(value)), 18],
    }


def write_fixtures(fixtures_dir):
    base = {
        "extraction": {
            "fields": {
                "Title": {"value": TEXTS[0], "confidence": 0.93},
                "Date": {"value": "14 March 2024", "confidence": 0.90},
                "Scale": {"value": "1:1250", "confidence": 0.97},
            }
        },
        "pii_detection": {
            "candidates": [
                candidate("Names", "Grace Hopper", 0.55, 3),
                candidate("Phones", "01632 960123", 0.74, 5),
                candidate("Emails", "grace.hopper@example.org", 0.92, 4),
            ]
        },
        "visual_detection": {
            "detections": [
                {"label": "north_point", "page_index": 0, "bbox": [30, 200, 48, 72], "score": 0.9},
                {"label": "red_line", "page_index": 0, "bbox": [150, 180, 120, 90], "score": 0.85},
            ]
        },
    }
    for task, payload in base.items():
        (fixtures_dir / f"{task}_attempt1.json").write_text(
            json.dumps({"payload": payload, "input_tokens": 400, "output_tokens": 90})
        )

    # ui-blk-001 also sees a phone-shaped candidate whose format verifier fails
    blocked_dir = fixtures_dir / "ui-blk-001"
    blocked_dir.mkdir()
    blocked = {
        "candidates": base["pii_detection"]["candidates"] + [candidate("Phones", "12345", 0.30, 6)]
    }
    (blocked_dir / "pii_detection_attempt1.json").write_text(
        json.dumps({"payload": blocked, "input_tokens": 400, "output_tokens": 90})
    )

    # ui-fail-001: every visual detection attempt dies on the wire
    fail_dir = fixtures_dir / "ui-fail-001"
    fail_dir.mkdir()
    for attempt in (1, 2):
        (fail_dir / f"visual_detection_attempt{attempt}.json").write_text(
            json.dumps({"error": "transport", "message": "scripted outage"})
        )


def seed(client, scratch):
    for doc_id, tasks in TASKS_BY_DOC.items():
        payload = zip_bundle(make_bundle(doc_id), scratch)
        reply = client.post(f"/api/v1/documents?operator_id={OPERATOR}", content=payload)
        reply.raise_for_status()
        for task in tasks:
            reply = client.post(
                f"/api/v1/documents/{doc_id}/tasks",
                json={"task_kind": task, "operator_id": OPERATOR},
            )
            reply.raise_for_status()
            job = reply.json()["job"]
            assert job["status"] == "done", f"{doc_id} {task}: {job}"


def free_port():
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


def main():
    workdir = Path(sys.argv[1])
    fixtures = workdir / "fixtures"
    fixtures.mkdir(parents=True)
    write_fixtures(fixtures)
    scratch = workdir / "scratch"
    scratch.mkdir()
    app = create_app(workdir / "data", MockProvider(fixtures), direct_mode=True)
    with TestClient(app) as client:
        seed(client, scratch)
    port = free_port()
    print(f"READY {port}", flush=True)
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")


if __name__ == "__main__":
    main()
