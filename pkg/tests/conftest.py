import random

import numpy as np
import pytest

from planintel.audit import AuditLog
from planintel.docmodel import BoundingBox, DocumentBundle, Page, TextSpan

WORDS = (
    "planning", "permission", "granted", "boundary", "elevation", "dwelling",
    "garage", "extension", "conservatory", "access", "drainage", "hedgerow",
)


def make_page(index=0, width=420, height=320, fill=255, spans=None):
    image = np.full((height, width), fill, dtype=np.uint8)
    return Page(index, width, height, image, list(spans or []))


def make_bundle(doc_id="doc-1", n_pages=1, spans_per_page=3, seed=0, texts=None):
    """Small deterministic bundle; span rows never overlap."""
    rng = random.Random(seed)
    pages = []
    counter = 0
    if texts is not None and n_pages == 1:
        spans_per_page = len(texts)
    for p in range(n_pages):
        spans = []
        for row in range(spans_per_page):
            if texts is not None:
                text = texts[counter % len(texts)]
            else:
                text = " ".join(rng.choice(WORDS) for _ in range(rng.randint(1, 4)))
            bbox = BoundingBox(10, 12 + row * 30, max(8, 7 * len(text)), 18)
            spans.append(TextSpan(f"s{p}-{row}", text, p, bbox))
            counter += 1
        pages.append(make_page(p, spans=spans))
    return DocumentBundle(doc_id, pages, {"source": "test"}, provenance="unit")


@pytest.fixture
def bundle():
    return make_bundle()


@pytest.fixture
def audit_log(tmp_path):
    return AuditLog(tmp_path / "audit")


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(text): acceptance criterion reported in the run summary"
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None and report.when == "call":
        report.criterion_text = marker.args[0]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    entries = []
    for bucket in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(bucket, ()):
            text = getattr(report, "criterion_text", None)
            if text is not None:
                entries.append((text, bucket == "passed"))
    if not entries:
        return
    terminalreporter.section("acceptance criteria")
    for text, ok in entries:
        terminalreporter.write_line(("PASS  " if ok else "FAIL  ") + text)
