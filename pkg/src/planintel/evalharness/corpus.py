"""Seed-deterministic synthetic plan corpus with complete gold annotations."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..docmodel import (
    BoundingBox,
    DocumentBundle,
    Page,
    TextSpan,
    load_bundle,
    save_bundle,
    span_char_offsets,
)
from ..pii import Location
from ..vischeck import template_library

PAGE_W, PAGE_H = 800, 1000
TEXT_GRAY = 235  # light enough to stay invisible to the edge detector
CHAR_W, LINE_H = 9, 22
TITLE_CHAR_W = 14  # headings render wider than body text

FIRST_NAMES = (
    "Alice", "Brian", "Carol", "David", "Emma", "Frank", "Grace", "Henry", "Isla", "James",
    "Karen", "Liam", "Mary", "Nigel", "Olivia", "Peter", "Quinn", "Rachel", "Simon", "Tessa",
)
LAST_NAMES = (
    "Ashford", "Bennett", "Clarke", "Dawson", "Ellis", "Foster", "Graham", "Holloway",
    "Ingram", "Jarvis", "Kendall", "Lawson", "Mercer", "Norwood", "Osborne", "Pritchard",
)
STREETS = ("Mill Lane", "Station Road", "High Street", "Orchard Close", "Victoria Avenue", "Church Walk")
# Address forms without a postcode or a lexicon suffix; invisible to the baseline.
PLAIN_ADDRESSES = (
    "Flat 2, The Old Granary, Baildon",
    "Unit 7, Riverside Works, Shipley",
    "The Coach House, Low Fold",
    "Barn at Top Farm, Esholt",
    "Plot 4, Former Dairy Site",
    "Annex, Glebe House, Menston",
)
POSTCODES = ("LS1 4AP", "BD17 5HE", "HG1 2RQ", "YO8 4QH")
EMAIL_DOMAINS = ("example.org", "mail.co.uk", "lodgings.net", "agentmail.com")
TITLES = (
    "Proposed Rear Extension",
    "Site Location Plan",
    "Block Plan As Proposed",
    "Erection of Detached Garage",
    "Change of Use to Cafe",
    "Loft Conversion with Dormer",
    "Proposed Two Storey Side Extension",
    "New Vehicular Access",
)
DECOY_HEADERS = (
    "Submitted via the national planning application portal service",
    "Drawing issued for planning approval purposes only not construction",
)
MONTH_NAMES = (
    "January", "February", "March", "April", "May", "June",
    "July", "August", "September", "October", "November", "December",
)


@dataclass(frozen=True)
class GoldPIIItem:
    category: str
    value: str
    locations: tuple[Location, ...]


@dataclass(frozen=True)
class GoldAnnotation:
    doc_id: str
    field_spans: dict[str, list[tuple[int, int]]]  # char intervals into document_text
    pii_items: tuple[GoldPIIItem, ...]
    symbol_boxes: dict[str, list[BoundingBox]]
    field_values: dict[str, str]


def _span_box(x: int, y: int, text: str, char_w: int = CHAR_W) -> BoundingBox:
    return BoundingBox(x, y, max(char_w * len(text), char_w), LINE_H)


def _draw_span(image: np.ndarray, box: BoundingBox) -> None:
    image[box.y : box.bottom, box.x : box.right] = TEXT_GRAY


def _draw_rect_outline(image: np.ndarray, box: BoundingBox, thickness: int = 3) -> None:
    image[box.y : box.y + thickness, box.x : box.right] = 0
    image[box.bottom - thickness : box.bottom, box.x : box.right] = 0
    image[box.y : box.bottom, box.x : box.x + thickness] = 0
    image[box.y : box.bottom, box.right - thickness : box.right] = 0


def _random_date(rng: random.Random) -> str:
    day = rng.randint(1, 28)
    month = rng.choice(MONTH_NAMES)
    year = rng.randint(2022, 2026)
    return f"{day} {month} {year}"


def _random_phone(rng: random.Random) -> str:
    return f"0{rng.choice(['113', '117', '161', '131'])} {rng.randint(200, 999)} {rng.randint(1000, 9999)}"


def _random_email(rng: random.Random) -> str:
    first = rng.choice(FIRST_NAMES).lower()
    last = rng.choice(LAST_NAMES).lower()
    return f"{first}.{last}@{rng.choice(EMAIL_DOMAINS)}"


def _random_address(rng: random.Random) -> str:
    # one in four addresses is baseline-detectable (street suffix or postcode)
    if rng.random() < 0.25:
        if rng.random() < 0.5:
            return f"{rng.randint(1, 99)} {rng.choice(STREETS)}"
        return f"{rng.randint(1, 99)} Westgate, {rng.choice(POSTCODES)}"
    return rng.choice(PLAIN_ADDRESSES)


def generate_document(rng: random.Random, doc_id: str) -> tuple[DocumentBundle, GoldAnnotation]:
    image = np.full((PAGE_H, PAGE_W), 255, dtype=np.uint8)
    spans: list[TextSpan] = []
    counter = 0

    def add_span(text: str, x: int, y: int, char_w: int = CHAR_W) -> TextSpan:
        nonlocal counter
        span = TextSpan(f"s{counter}", text, 0, _span_box(x, y, text, char_w))
        counter += 1
        spans.append(span)
        _draw_span(image, span.bbox)
        return span

    title = rng.choice(TITLES)
    title_span = add_span(title, 60, 40, TITLE_CHAR_W)
    if rng.random() < 0.25:  # decoy: a wider top-band span the width heuristic prefers
        add_span(rng.choice(DECOY_HEADERS), 60, 100)

    date_value = _random_date(rng)
    date_span = add_span(f"Date: {date_value}", 60, 140)
    scale_value = rng.choice(("1:1250", "1:2500"))
    add_span(f"Scale {scale_value}", 60, 170)

    pii_items: list[GoldPIIItem] = []
    n_pii = rng.randint(0, 5)
    makers = {
        "Names": lambda: f"{rng.choice(FIRST_NAMES)} {rng.choice(LAST_NAMES)}",
        "Addresses": lambda: _random_address(rng),
        "Emails": lambda: _random_email(rng),
        "Phones": lambda: _random_phone(rng),
    }
    used_values: set[str] = set()
    y = 220
    for _ in range(n_pii):
        category = rng.choice(list(makers))
        value = makers[category]()
        if value in used_values:
            continue  # duplicates would make gold counting ambiguous
        used_values.add(value)
        span = add_span(value, 60, y)
        y += 45
        pii_items.append(
            GoldPIIItem(category, value, (Location(0, span.bbox, span.span_id),))
        )

    if rng.random() < 0.25:  # decoy date in the footer, never equal to the real one
        decoy = _random_date(rng)
        while decoy == date_value:
            decoy = _random_date(rng)
        add_span(f"Printed {decoy}", 60, 950)

    # drawing content: red-line rectangle and a stamped north point
    rect_w = rng.randint(180, 320)
    rect_h = rng.randint(140, 260)
    rect_x = rng.randint(60, PAGE_W - rect_w - 80)
    rect_y = rng.randint(480, PAGE_H - rect_h - 100)
    rect_box = BoundingBox(rect_x, rect_y, rect_w, rect_h)
    _draw_rect_outline(image, rect_box)

    template = template_library()["north_point"]
    rotation = rng.randrange(4)
    stamp = np.rot90(template, k=rotation)
    sh, sw = stamp.shape
    for _ in range(200):
        nx = rng.randint(40, PAGE_W - sw - 40)
        ny = rng.randint(420, PAGE_H - sh - 40)
        north_box = BoundingBox(nx, ny, sw, sh)
        clear = BoundingBox(max(nx - 12, 0), max(ny - 12, 0), sw + 24, sh + 24)
        if clear.intersection_area(rect_box) == 0 and all(
            clear.intersection_area(s.bbox) == 0 for s in spans
        ):
            break
    else:
        raise RuntimeError(f"could not place the north point on {doc_id}")
    region = image[ny : ny + sh, nx : nx + sw]
    image[ny : ny + sh, nx : nx + sw] = np.minimum(region, stamp)

    page = Page(0, PAGE_W, PAGE_H, image, spans)
    bundle = DocumentBundle(doc_id, [page], metadata={}, provenance="synthetic")
    bundle.validate()

    # field gold as character intervals into document_text
    offsets = span_char_offsets(bundle)
    title_start = offsets[title_span.span_id][0]
    date_start = offsets[date_span.span_id][0] + date_span.text.index(date_value)
    gold = GoldAnnotation(
        doc_id=doc_id,
        field_spans={
            "Title": [(title_start, title_start + len(title))],
            "Date": [(date_start, date_start + len(date_value))],
        },
        pii_items=tuple(pii_items),
        symbol_boxes={"north_point": [north_box], "red_line": [rect_box]},
        field_values={"Title": title, "Date": date_value, "Scale": scale_value},
    )
    return bundle, gold


def generate_synthetic_corpus(seed: int, n_docs: int) -> tuple[list[DocumentBundle], list[GoldAnnotation]]:
    """Deterministic by seed: same inputs produce byte-identical bundles and gold."""
    if n_docs < 1:
        raise ValueError("n_docs must be at least 1")
    rng = random.Random(seed)
    bundles, golds = [], []
    for i in range(n_docs):
        bundle, gold = generate_document(rng, f"synth-{seed}-{i:04d}")
        bundles.append(bundle)
        golds.append(gold)
    return bundles, golds


# ---------------------------------------------------------------------------
# Gold file round-trip

def gold_to_payload(gold: GoldAnnotation) -> dict:
    return {
        "doc_id": gold.doc_id,
        "field_spans": {k: [list(span) for span in v] for k, v in gold.field_spans.items()},
        "pii_items": [
            {
                "category": item.category,
                "value": item.value,
                "locations": [
                    {"page_index": loc.page_index,
                     "bbox": [loc.bbox.x, loc.bbox.y, loc.bbox.w, loc.bbox.h],
                     "span_id": loc.span_id}
                    for loc in item.locations
                ],
            }
            for item in gold.pii_items
        ],
        "symbol_boxes": {
            label: [[b.x, b.y, b.w, b.h] for b in boxes]
            for label, boxes in gold.symbol_boxes.items()
        },
        "field_values": dict(gold.field_values),
    }


def gold_from_payload(raw: dict) -> GoldAnnotation:
    return GoldAnnotation(
        doc_id=raw["doc_id"],
        field_spans={k: [tuple(span) for span in v] for k, v in raw["field_spans"].items()},
        pii_items=tuple(
            GoldPIIItem(
                item["category"],
                item["value"],
                tuple(
                    Location(loc["page_index"], BoundingBox(*loc["bbox"]), loc.get("span_id"))
                    for loc in item["locations"]
                ),
            )
            for item in raw["pii_items"]
        ),
        symbol_boxes={
            label: [BoundingBox(*box) for box in boxes]
            for label, boxes in raw["symbol_boxes"].items()
        },
        field_values=dict(raw["field_values"]),
    )


def save_corpus(out_dir: str | Path, bundles: list[DocumentBundle], golds: list[GoldAnnotation]) -> None:
    root = Path(out_dir)
    (root / "gold").mkdir(parents=True, exist_ok=True)
    for bundle, gold in zip(bundles, golds):
        save_bundle(bundle, root / "bundles" / bundle.doc_id)
        payload = json.dumps(gold_to_payload(gold), indent=2, sort_keys=True)
        (root / "gold" / f"{gold.doc_id}.json").write_text(payload, encoding="utf-8")


def load_corpus(root_dir: str | Path) -> tuple[list[DocumentBundle], list[GoldAnnotation]]:
    root = Path(root_dir)
    bundles = []
    golds = []
    for gold_path in sorted((root / "gold").glob("*.json")):
        gold = gold_from_payload(json.loads(gold_path.read_text(encoding="utf-8")))
        golds.append(gold)
        bundles.append(load_bundle(root / "bundles" / gold.doc_id))
    return bundles, golds
