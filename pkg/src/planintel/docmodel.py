"""Portable document bundle: pages, grayscale rasters, positioned text, content hashing."""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

HASH_ALGORITHM = "sha256"
MAGIC = "planbundle"
FORMAT_VERSION = 1
MANIFEST_NAME = "manifest"

# Two spans count as same-line when their vertical overlap is at least this
# fraction of the shorter span's height.
SAME_LINE_OVERLAP = 0.5


class BundleError(ValueError):
    """Malformed bundle container or invariant violation."""


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned pixel rectangle: top-left corner plus extent."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self) -> None:
        if self.w <= 0 or self.h <= 0:
            raise BundleError(f"bounding box extent must be positive, got {self.w}x{self.h}")
        if self.x < 0 or self.y < 0:
            raise BundleError(f"bounding box origin must be non-negative, got ({self.x},{self.y})")

    @property
    def right(self) -> int:
        return self.x + self.w

    @property
    def bottom(self) -> int:
        return self.y + self.h

    @property
    def area(self) -> int:
        return self.w * self.h

    def intersection_area(self, other: "BoundingBox") -> int:
        iw = min(self.right, other.right) - max(self.x, other.x)
        ih = min(self.bottom, other.bottom) - max(self.y, other.y)
        if iw <= 0 or ih <= 0:
            return 0
        return iw * ih

    def iou(self, other: "BoundingBox") -> float:
        inter = self.intersection_area(other)
        if inter == 0:
            return 0.0
        return inter / (self.area + other.area - inter)

    def contains(self, other: "BoundingBox") -> bool:
        return (
            other.x >= self.x
            and other.y >= self.y
            and other.right <= self.right
            and other.bottom <= self.bottom
        )


@dataclass(frozen=True)
class TextSpan:
    """A positioned run of text on a page."""

    span_id: str
    text: str
    page_index: int
    bbox: BoundingBox

    def __post_init__(self) -> None:
        if not self.span_id:
            raise BundleError("span_id must be non-empty")
        if not self.text:
            raise BundleError(f"span {self.span_id!r}: text must be non-empty")


@dataclass
class Page:
    """A page raster (8-bit grayscale) with its ordered text spans."""

    index: int
    width: int
    height: int
    image: np.ndarray
    spans: list[TextSpan] = field(default_factory=list)

    def extent(self) -> BoundingBox:
        return BoundingBox(0, 0, self.width, self.height)

    def validate(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise BundleError(f"page {self.index}: extent must be positive")
        if self.image.dtype != np.uint8 or self.image.ndim != 2:
            raise BundleError(f"page {self.index}: raster must be 2-d uint8")
        if self.image.shape != (self.height, self.width):
            raise BundleError(
                f"page {self.index}: raster is {self.image.shape[1]}x{self.image.shape[0]}, "
                f"declared {self.width}x{self.height}"
            )
        ext = self.extent()
        for span in self.spans:
            if span.page_index != self.index:
                raise BundleError(f"span {span.span_id!r}: page_index {span.page_index} != {self.index}")
            if not ext.contains(span.bbox):
                raise BundleError(f"span {span.span_id!r}: bbox exceeds page {self.index} extent")


@dataclass
class DocumentBundle:
    """The unit of ingestion, redaction, and hashing."""

    doc_id: str
    pages: list[Page] = field(default_factory=list)
    metadata: dict[str, str] = field(default_factory=dict)
    provenance: str = ""

    def validate(self) -> None:
        if not self.doc_id:
            raise BundleError("doc_id must be non-empty")
        seen: set[str] = set()
        for i, page in enumerate(self.pages):
            if page.index != i:
                raise BundleError(f"page indices must be contiguous from 0, found {page.index} at {i}")
            page.validate()
            for span in page.spans:
                if span.span_id in seen:
                    raise BundleError(f"span id {span.span_id!r} duplicated in bundle")
                seen.add(span.span_id)

    def all_spans(self) -> list[TextSpan]:
        return [span for page in self.pages for span in page.spans]

    def find_span(self, span_id: str) -> TextSpan:
        for span in self.all_spans():
            if span.span_id == span_id:
                return span
        raise KeyError(span_id)

    def copy(self) -> "DocumentBundle":
        pages = [
            Page(p.index, p.width, p.height, p.image.copy(), list(p.spans))
            for p in self.pages
        ]
        return DocumentBundle(self.doc_id, pages, dict(self.metadata), self.provenance)


# ---------------------------------------------------------------------------
# Canonical serialization

def _lp(text: str) -> str:
    raw = text.encode("utf-8")
    return f"{len(raw)}:{text}"


def page_raster_name(index: int) -> str:
    return f"page_{index:04d}.pgm"


def canonical_manifest(bundle: DocumentBundle) -> bytes:
    """Canonical manifest bytes: pages ascending, spans in order, text length-prefixed."""
    out: list[str] = []
    out.append(f"{MAGIC} {FORMAT_VERSION}")
    out.append(f"hash {HASH_ALGORITHM}")
    out.append(f"doc_id {_lp(bundle.doc_id)}")
    out.append(f"provenance {_lp(bundle.provenance)}")
    out.append(f"meta {len(bundle.metadata)}")
    for key in sorted(bundle.metadata):
        out.append(f"entry {_lp(key)} {_lp(bundle.metadata[key])}")
    out.append(f"pages {len(bundle.pages)}")
    for page in bundle.pages:
        out.append(f"page {page.index} {page.width} {page.height} {page_raster_name(page.index)}")
        out.append(f"spans {len(page.spans)}")
        for span in page.spans:
            b = span.bbox
            out.append(f"span {_lp(span.span_id)} {b.x} {b.y} {b.w} {b.h} {_lp(span.text)}")
    return ("\n".join(out) + "\n").encode("utf-8")


def write_pgm(image: np.ndarray) -> bytes:
    h, w = image.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + image.tobytes(order="C")


def read_pgm(raw: bytes) -> np.ndarray:
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+255\s", raw)
    if not m:
        raise BundleError("page raster is not an 8-bit binary PGM")
    w, h = int(m.group(1)), int(m.group(2))
    pixels = raw[m.end():]
    if len(pixels) != w * h:
        raise BundleError(f"PGM payload is {len(pixels)} bytes, expected {w * h}")
    return np.frombuffer(pixels, dtype=np.uint8).reshape(h, w).copy()


def canonical_bytes(bundle: DocumentBundle) -> bytes:
    """The byte stream content_hash digests: manifest, then each page raster."""
    chunks = [canonical_manifest(bundle)]
    for page in bundle.pages:
        chunks.append(write_pgm(page.image))
    return b"".join(chunks)


def content_hash(bundle: DocumentBundle) -> str:
    """Deterministic digest of the bundle's canonical serialization."""
    return hashlib.sha256(canonical_bytes(bundle)).hexdigest()


def save_bundle(bundle: DocumentBundle, path: str | Path) -> str:
    """Write the bundle directory; returns the content hash of the written bytes."""
    bundle.validate()
    root = Path(path)
    try:
        root.mkdir(parents=True, exist_ok=True)
        digest = hashlib.sha256()
        manifest = canonical_manifest(bundle)
        (root / MANIFEST_NAME).write_bytes(manifest)
        digest.update(manifest)
        for page in bundle.pages:
            raw = write_pgm(page.image)
            (root / page_raster_name(page.index)).write_bytes(raw)
            digest.update(raw)
    except OSError as exc:
        raise BundleError(f"cannot write bundle at {root}: {exc}") from exc
    return digest.hexdigest()


class _ManifestReader:
    """Token reader for the length-prefixed manifest grammar."""

    def __init__(self, raw: bytes):
        self.raw = raw
        self.pos = 0

    def _skip_ws(self) -> None:
        while self.pos < len(self.raw) and self.raw[self.pos] in b" \n\r\t":
            self.pos += 1

    def word(self) -> str:
        self._skip_ws()
        start = self.pos
        while self.pos < len(self.raw) and self.raw[self.pos] not in b" \n\r\t":
            self.pos += 1
        if start == self.pos:
            raise BundleError("manifest truncated")
        return self.raw[start:self.pos].decode("utf-8")

    def integer(self) -> int:
        tok = self.word()
        try:
            return int(tok, 10)
        except ValueError as exc:
            raise BundleError(f"expected integer, got {tok!r}") from exc

    def lpstring(self) -> str:
        self._skip_ws()
        start = self.pos
        while self.pos < len(self.raw) and self.raw[self.pos : self.pos + 1].isdigit():
            self.pos += 1
        if start == self.pos or self.raw[self.pos : self.pos + 1] != b":":
            raise BundleError("expected length-prefixed string")
        length = int(self.raw[start:self.pos], 10)
        self.pos += 1
        data = self.raw[self.pos : self.pos + length]
        if len(data) != length:
            raise BundleError("length-prefixed string truncated")
        self.pos += length
        return data.decode("utf-8")

    def expect(self, keyword: str) -> None:
        tok = self.word()
        if tok != keyword:
            raise BundleError(f"expected {keyword!r} in manifest, got {tok!r}")


def load_bundle(path: str | Path) -> DocumentBundle:
    """Load and fully validate a bundle directory."""
    root = Path(path)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.is_file():
        raise BundleError(f"no manifest at {manifest_path}")
    r = _ManifestReader(manifest_path.read_bytes())
    r.expect(MAGIC)
    version = r.integer()
    if version != FORMAT_VERSION:
        raise BundleError(f"unsupported bundle version {version}")
    r.expect("hash")
    algo = r.word()
    if algo != HASH_ALGORITHM:
        raise BundleError(f"unsupported hash algorithm {algo!r}")
    r.expect("doc_id")
    doc_id = r.lpstring()
    r.expect("provenance")
    provenance = r.lpstring()
    r.expect("meta")
    metadata: dict[str, str] = {}
    for _ in range(r.integer()):
        r.expect("entry")
        key = r.lpstring()
        metadata[key] = r.lpstring()
    r.expect("pages")
    n_pages = r.integer()
    pages: list[Page] = []
    for _ in range(n_pages):
        r.expect("page")
        index = r.integer()
        width = r.integer()
        height = r.integer()
        raster_name = r.word()
        raster_path = root / raster_name
        if not raster_path.is_file():
            raise BundleError(f"page {index}: missing raster file {raster_name}")
        image = read_pgm(raster_path.read_bytes())
        r.expect("spans")
        spans: list[TextSpan] = []
        for _ in range(r.integer()):
            r.expect("span")
            span_id = r.lpstring()
            x, y, w, h = r.integer(), r.integer(), r.integer(), r.integer()
            text = r.lpstring()
            spans.append(TextSpan(span_id, text, index, BoundingBox(x, y, w, h)))
        pages.append(Page(index, width, height, image, spans))
    bundle = DocumentBundle(doc_id, pages, metadata, provenance)
    bundle.validate()
    return bundle


# ---------------------------------------------------------------------------
# Text geometry and search

def char_box(span: TextSpan, start: int, end: int) -> BoundingBox:
    """Box over chars [start, end) by proportional mapping, widened outward to whole pixels."""
    n = len(span.text)
    if not (0 <= start < end <= n):
        raise ValueError(f"char range [{start},{end}) invalid for span of length {n}")
    b = span.bbox
    x0 = b.x + math.floor(b.w * start / n)
    x1 = b.x + math.ceil(b.w * end / n)
    return BoundingBox(x0, b.y, max(1, x1 - x0), b.h)


def covered_chars(span: TextSpan, region: BoundingBox) -> set[int]:
    """Char indices whose proportional boxes touch `region`; any overlap counts (over-redaction is safe)."""
    b = span.bbox
    iw = min(b.right, region.right) - max(b.x, region.x)
    ih = min(b.bottom, region.bottom) - max(b.y, region.y)
    if iw <= 0 or ih <= 0:
        return set()
    n = len(span.text)
    covered: set[int] = set()
    for i in range(n):
        cx0 = b.x + b.w * i / n
        cx1 = b.x + b.w * (i + 1) / n
        if cx0 <= region.right and cx1 >= region.x:
            covered.add(i)
    # Geometric overlap that resolves to no characters is ambiguous: widen to the whole span.
    if not covered:
        covered = set(range(n))
    return covered


def same_line(a: TextSpan, b: TextSpan) -> bool:
    """Same-line rule: vertical bbox overlap of at least half the shorter height."""
    if a.page_index != b.page_index:
        return False
    overlap = min(a.bbox.bottom, b.bbox.bottom) - max(a.bbox.y, b.bbox.y)
    return overlap >= SAME_LINE_OVERLAP * min(a.bbox.h, b.bbox.h)


def page_lines(page: Page) -> list[list[TextSpan]]:
    """Group page spans into lines (transitive same-line closure), each ordered by ascending x."""
    spans = page.spans
    parent = list(range(len(spans)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(spans)):
        for j in range(i + 1, len(spans)):
            if same_line(spans[i], spans[j]):
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[rj] = ri
    groups: dict[int, list[int]] = {}
    for i in range(len(spans)):
        groups.setdefault(find(i), []).append(i)
    lines = []
    for members in groups.values():
        members.sort(key=lambda i: (spans[i].bbox.x, spans[i].bbox.y, i))
        lines.append([spans[i] for i in members])
    lines.sort(key=lambda line: (line[0].bbox.y, line[0].bbox.x))
    return lines


@dataclass(frozen=True)
class OccurrenceFragment:
    """The slice of one span covered by an occurrence."""

    span_id: str
    start: int
    end: int
    bbox: BoundingBox


@dataclass(frozen=True)
class Occurrence:
    """One needle occurrence: where it starts plus the span fragments it covers."""

    page_index: int
    span_id: str
    char_offset: int
    fragments: tuple[OccurrenceFragment, ...]


def _all_find(haystack: str, needle: str) -> list[int]:
    hits = []
    i = haystack.find(needle)
    while i != -1:
        hits.append(i)
        i = haystack.find(needle, i + 1)
    return hits


def find_occurrence_regions(bundle: DocumentBundle, needle: str) -> list[Occurrence]:
    """Occurrences of `needle` in span texts and same-line adjacent-span concatenations."""
    if not needle:
        raise ValueError("needle must be non-empty")
    found: dict[tuple[int, str, int], Occurrence] = {}
    for page in bundle.pages:
        for line in page_lines(page):
            concat = "".join(s.text for s in line)
            offsets = []  # span start offsets within concat
            pos = 0
            for s in line:
                offsets.append(pos)
                pos += len(s.text)
            for hit in _all_find(concat, needle):
                end = hit + len(needle)
                fragments = []
                for s, off in zip(line, offsets):
                    lo = max(hit, off)
                    hi = min(end, off + len(s.text))
                    if lo < hi:
                        fragments.append(
                            OccurrenceFragment(s.span_id, lo - off, hi - off, char_box(s, lo - off, hi - off))
                        )
                first = fragments[0]
                key = (page.index, first.span_id, first.start)
                occ = Occurrence(page.index, first.span_id, first.start, tuple(fragments))
                found.setdefault(key, occ)
        # Spans not merged into any multi-span line are still covered above:
        # every span is a member of exactly one line (possibly a singleton).
    order = {s.span_id: i for i, s in enumerate(bundle.all_spans())}
    return sorted(found.values(), key=lambda o: (o.page_index, order[o.span_id], o.char_offset))


def find_text_occurrences(bundle: DocumentBundle, needle: str) -> list[tuple[int, str, int]]:
    """Every occurrence of `needle`, reported as (page_index, span_id, char_offset)."""
    return [(o.page_index, o.span_id, o.char_offset) for o in find_occurrence_regions(bundle, needle)]


def document_text(bundle: DocumentBundle) -> str:
    """Span texts joined with newlines, in canonical span order."""
    return "\n".join(span.text for span in bundle.all_spans())


def span_char_offsets(bundle: DocumentBundle) -> dict[str, tuple[int, int]]:
    """Map from span_id to that span's [start, end) slice of document_text."""
    offsets: dict[str, tuple[int, int]] = {}
    pos = 0
    for span in bundle.all_spans():
        offsets[span.span_id] = (pos, pos + len(span.text))
        pos += len(span.text) + 1
    return offsets


def blank_page(index: int, width: int, height: int, value: int = 255) -> Page:
    """Convenience constructor for a uniform page raster."""
    return Page(index, width, height, np.full((height, width), value, dtype=np.uint8))


__all__ = [
    "BoundingBox",
    "BundleError",
    "DocumentBundle",
    "Occurrence",
    "OccurrenceFragment",
    "Page",
    "TextSpan",
    "blank_page",
    "canonical_bytes",
    "canonical_manifest",
    "char_box",
    "content_hash",
    "covered_chars",
    "document_text",
    "find_occurrence_regions",
    "find_text_occurrences",
    "load_bundle",
    "page_lines",
    "read_pgm",
    "same_line",
    "save_bundle",
    "span_char_offsets",
    "write_pgm",
]
