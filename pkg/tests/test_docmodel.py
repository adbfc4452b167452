import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from planintel.docmodel import (
    BoundingBox,
    BundleError,
    DocumentBundle,
    Page,
    TextSpan,
    blank_page,
    canonical_manifest,
    content_hash,
    document_text,
    find_text_occurrences,
    load_bundle,
    read_pgm,
    save_bundle,
    span_char_offsets,
    write_pgm,
)

from conftest import make_bundle, make_page


def test_save_load_round_trip(tmp_path, bundle):
    digest = save_bundle(bundle, tmp_path / "b")
    loaded = load_bundle(tmp_path / "b")
    assert loaded.doc_id == bundle.doc_id
    assert loaded.metadata == bundle.metadata
    assert loaded.provenance == bundle.provenance
    assert [s.text for s in loaded.all_spans()] == [s.text for s in bundle.all_spans()]
    assert np.array_equal(loaded.pages[0].image, bundle.pages[0].image)
    assert content_hash(loaded) == content_hash(bundle) == digest


def test_content_hash_sensitive_to_text_and_pixels(bundle):
    base = content_hash(bundle)
    edited = bundle.copy()
    span = edited.pages[0].spans[0]
    edited.pages[0].spans[0] = TextSpan(span.span_id, span.text + "!", span.page_index, span.bbox)
    assert content_hash(edited) != base

    repainted = bundle.copy()
    repainted.pages[0].image[5, 5] = 0
    assert content_hash(repainted) != base
    assert content_hash(bundle.copy()) == base


def test_metadata_order_does_not_change_manifest():
    a = make_bundle()
    a.metadata = {"x": "1", "y": "2"}
    b = make_bundle()
    b.metadata = {"y": "2", "x": "1"}
    assert canonical_manifest(a) == canonical_manifest(b)


def test_span_char_offsets_slices_recover_span_texts(bundle):
    text = document_text(bundle)
    offsets = span_char_offsets(bundle)
    for span in bundle.all_spans():
        start, end = offsets[span.span_id]
        assert text[start:end] == span.text


def test_document_text_joins_with_newlines():
    b = make_bundle(texts=["alpha", "beta", "gamma"])
    assert document_text(b) == "alpha\nbeta\ngamma"


def _brute_occurrences(bundle, needle):
    hits = []
    for page in bundle.pages:
        for span in page.spans:
            start = span.text.find(needle)
            while start != -1:
                hits.append((page.index, span.span_id, start))
                start = span.text.find(needle, start + 1)
    return hits


def test_find_text_occurrences_matches_brute_force():
    b = make_bundle(texts=["the fox and the hound", "nothing here", "the end the"], spans_per_page=3)
    for needle in ("the", "fox", "zzz", "nd"):
        assert find_text_occurrences(b, needle) == _brute_occurrences(b, needle)


def test_pgm_round_trip():
    image = np.arange(42 * 17, dtype=np.uint8).reshape(17, 42) % 251
    assert np.array_equal(read_pgm(write_pgm(image)), image)


def test_read_pgm_rejects_wrong_payload_size():
    raw = write_pgm(np.zeros((4, 4), dtype=np.uint8))[:-3]
    with pytest.raises(BundleError):
        read_pgm(raw)


def test_validate_rejects_duplicate_span_ids():
    s = TextSpan("dup", "x", 0, BoundingBox(0, 0, 5, 5))
    t = TextSpan("dup", "y", 0, BoundingBox(0, 20, 5, 5))
    b = DocumentBundle("d", [make_page(0, spans=[s, t])])
    with pytest.raises(BundleError, match="duplicated"):
        b.validate()


def test_validate_rejects_gapped_page_indices():
    b = DocumentBundle("d", [make_page(0), make_page(2)])
    with pytest.raises(BundleError, match="contiguous"):
        b.validate()


def test_validate_rejects_span_outside_page():
    s = TextSpan("s", "x", 0, BoundingBox(400, 10, 50, 10))
    b = DocumentBundle("d", [make_page(0, width=420, spans=[s])])
    with pytest.raises(BundleError, match="exceeds"):
        b.validate()


def test_validate_rejects_non_uint8_raster():
    page = Page(0, 4, 4, np.zeros((4, 4), dtype=np.float32))
    with pytest.raises(BundleError, match="uint8"):
        DocumentBundle("d", [page]).validate()


def test_bbox_rejects_degenerate_extent():
    with pytest.raises(BundleError):
        BoundingBox(0, 0, 0, 5)


def test_bbox_iou_known_values():
    a = BoundingBox(0, 0, 10, 10)
    assert a.iou(BoundingBox(0, 0, 10, 10)) == 1.0
    assert a.iou(BoundingBox(10, 0, 10, 10)) == 0.0
    # 5x10 overlap over union 150
    assert a.iou(BoundingBox(5, 0, 10, 10)) == pytest.approx(50 / 150)


def test_tampered_raster_detected_on_load(tmp_path, bundle):
    save_bundle(bundle, tmp_path / "b")
    raster = tmp_path / "b" / "page_0000.pgm"
    raw = bytearray(raster.read_bytes())
    raw[-1] ^= 0xFF
    raster.write_bytes(bytes(raw))
    loaded = load_bundle(tmp_path / "b")
    assert content_hash(loaded) != content_hash(bundle)


def test_truncated_raster_rejected_on_load(tmp_path, bundle):
    save_bundle(bundle, tmp_path / "b")
    raster = tmp_path / "b" / "page_0000.pgm"
    raster.write_bytes(raster.read_bytes()[:-10])
    with pytest.raises(BundleError):
        load_bundle(tmp_path / "b")


def test_blank_page_shape_and_value():
    page = blank_page(3, 7, 5, value=200)
    assert page.index == 3
    assert page.image.shape == (5, 7)
    assert int(page.image.min()) == int(page.image.max()) == 200


_span_texts = st.text(
    alphabet=st.characters(min_codepoint=32, max_codepoint=0x24F, blacklist_characters="\x7f"),
    min_size=1,
    max_size=12,
)


@settings(max_examples=40, deadline=None)
@given(st.lists(_span_texts, min_size=0, max_size=5), st.integers(0, 2**31))
def test_manifest_round_trip_arbitrary_texts(tmp_path_factory, texts, salt):
    """Length-prefixed strings keep any unicode text intact through disk."""
    spans = [
        TextSpan(f"s{i}", text, 0, BoundingBox(1, 1 + 20 * i, 10, 12))
        for i, text in enumerate(texts)
    ]
    bundle = DocumentBundle(f"doc-{salt}", [make_page(0, height=max(320, 25 * len(texts) + 40), spans=spans)])
    target = tmp_path_factory.mktemp("rt") / "b"
    save_bundle(bundle, target)
    loaded = load_bundle(target)
    assert [s.text for s in loaded.all_spans()] == texts
    assert loaded.doc_id == bundle.doc_id
    assert content_hash(loaded) == content_hash(bundle)
