import pytest

from planintel.docmodel import BoundingBox
from planintel.pii import (
    CandidateDraft,
    Location,
    PIICandidate,
    VERIFIER_FAILED,
    VERIFIER_NOT_APPLICABLE,
    VERIFIER_PASSED,
    address_ok,
    anchor_drafts,
    dedupe,
    email_ok,
    load_verifier_corpus,
    normalize_phone,
    normalize_value,
    phone_ok,
    postcode_ok,
    scan_emails,
    scan_phones,
    scan_postcodes,
    scan_street_addresses,
    verify_format,
)

from conftest import make_bundle


def candidate(category, value, verifier=VERIFIER_NOT_APPLICABLE, cid="c", conf=0.9, loc=None):
    loc = loc or Location(0, BoundingBox(5, 5, 40, 12))
    return PIICandidate(cid, category, value, (loc,), conf, verifier)


@pytest.mark.parametrize(
    "value,ok",
    [
        ("jane.doe@example.com", True),
        ("j+tag@sub.domain.co.uk", True),
        ("no-at-sign.example.com", False),
        ("two@@example.com", False),
        ("trailing@dot.", False),
        ("@example.com", False),
    ],
)
def test_email_ok(value, ok):
    assert email_ok(value) is ok


@pytest.mark.parametrize(
    "value,nsn",
    [
        ("020 7946 0958", "2079460958"),
        ("+44 20 7946 0958", "2079460958"),
        ("+44 (0)20 7946 0958", "2079460958"),
        ("01274 555 123", "1274555123"),
        ("07911 123456", "7911123456"),
    ],
)
def test_normalize_phone_strips_trunk(value, nsn):
    assert normalize_phone(value) == nsn
    assert phone_ok(value)


@pytest.mark.parametrize(
    "value",
    ["12345", "+1 555 0100", "0207", "++44 20", "020 7946 0958 x99", "no digits", ""],
)
def test_phone_rejects(value):
    assert not phone_ok(value)


@pytest.mark.parametrize(
    "value,ok",
    [
        ("BD17 5EX", True),
        ("M1 1AE", True),
        ("EC1A 1BB", True),
        ("bd17 5ex", True),
        ("BD175EX", True),      # the written space is optional
        ("BD17 5EXX", False),
        ("5EX BD17", False),
        ("BD 5EX", False),
        ("letters", False),
    ],
)
def test_postcode_ok(value, ok):
    assert postcode_ok(value) is ok


def test_address_ok_postcode_or_street_suffix():
    assert address_ok("14 Mill Lane, Baildon")
    assert address_ok("1 High Street")
    assert address_ok("The Cottage, BD17 5EX")
    assert not address_ok("The Old Granary, Baildon")  # no suffix, no postcode
    assert not address_ok("somewhere nice")


def test_scanners_report_offsets_into_text():
    text = "Contact jane@ex.co.uk or call 020 7946 0958 at 14 Mill Lane, BD17 5EX."
    (email,) = scan_emails(text)
    assert text[email[0]:email[1]] == "jane@ex.co.uk" == email[2]
    (phone,) = scan_phones(text)
    assert text[phone[0]:phone[1]] == phone[2]
    (postcode,) = scan_postcodes(text)
    assert postcode[2] == "BD17 5EX"
    (street,) = scan_street_addresses(text)
    assert street[2].startswith("14 Mill Lane")


def test_verify_format_gates_by_category():
    assert verify_format(candidate("Emails", "a@b.co")) == VERIFIER_PASSED
    assert verify_format(candidate("Emails", "not an email")) == VERIFIER_FAILED
    assert verify_format(candidate("Phones", "020 7946 0958")) == VERIFIER_PASSED
    assert verify_format(candidate("Phones", "12")) == VERIFIER_FAILED
    assert verify_format(candidate("Names", "Ada Byron")) == VERIFIER_NOT_APPLICABLE


def test_verifier_corpus_lines_all_classified_correctly():
    checks = {"emails": email_ok, "phones": phone_ok, "postcodes": postcode_ok}
    for name, fn in checks.items():
        pairs = load_verifier_corpus(name)
        assert len(pairs) >= 50
        wrong = [(value, expected) for value, expected in pairs if fn(value) is not expected]
        assert wrong == []


def test_dedupe_merges_overlapping_same_value():
    loc_a = Location(0, BoundingBox(10, 10, 50, 12))
    loc_b = Location(0, BoundingBox(12, 10, 50, 12))
    a = candidate("Names", "Ada Byron", cid="a", conf=0.7, loc=loc_a)
    b = candidate("Names", "ada byron", cid="b", conf=0.9, loc=loc_b)
    merged = dedupe([a, b])
    assert len(merged) == 1
    assert merged[0].confidence == 0.9
    assert len(merged[0].locations) == 2


def test_dedupe_keeps_distinct_values_and_far_locations():
    near = Location(0, BoundingBox(10, 10, 50, 12))
    far = Location(0, BoundingBox(10, 200, 50, 12))
    a = candidate("Names", "Ada Byron", cid="a", loc=near)
    b = candidate("Names", "Ada Byron", cid="b", loc=far)        # same text elsewhere
    c = candidate("Names", "Grace Hopper", cid="c", loc=near)    # other person, same spot
    out = dedupe([a, b, c])
    assert len(out) == 3
    assert [o.candidate_id for o in out] == ["pii-0000", "pii-0001", "pii-0002"]


def test_normalize_value_by_category():
    assert normalize_value("Emails", " A@B.CO ") == "a@b.co"
    assert normalize_value("Phones", "+44 20 7946 0958") == "2079460958"
    assert normalize_value("Names", "  Ada   BYRON ") == "ada byron"


def test_anchor_drafts_resolves_text_to_span_locations():
    bundle = make_bundle(texts=["Applicant: Ada Byron", "14 Mill Lane, Baildon", "notes"])
    drafts = [
        CandidateDraft("Names", "Ada Byron", 0.8, None, None),
        CandidateDraft("Addresses", "14 Mill Lane, Baildon", 0.7, None, None),
    ]
    out = anchor_drafts(bundle, drafts)
    assert len(out) == 2
    names = next(c for c in out if c.category == "Names")
    span = bundle.pages[0].spans[0]
    (loc,) = names.locations
    assert loc.span_id == span.span_id
    assert span.bbox.contains(loc.bbox)
    # the anchored box covers the value's characters, not the whole span
    assert loc.bbox.w < span.bbox.w


def test_anchor_drafts_drops_unfindable_values(audit_log):
    bundle = make_bundle(texts=["nothing relevant here"])
    drafts = [CandidateDraft("Names", "Ada Byron", 0.8, None, None)]
    assert anchor_drafts(bundle, drafts, audit=audit_log) == []
    dropped = audit_log.query(action="pii_hallucination_filtered")
    assert len(dropped) == 1
    assert dropped[0].payload["value"] == "Ada Byron"


def test_anchor_drafts_yields_one_candidate_per_occurrence():
    bundle = make_bundle(texts=["call 020 7946 0958 now", "or 020 7946 0958 later"])
    drafts = [CandidateDraft("Phones", "020 7946 0958", 0.9, None, None)]
    out = anchor_drafts(bundle, drafts)
    assert len(out) == 2
    spans = {loc.span_id for c in out for loc in c.locations}
    assert len(spans) == 2


def test_signatures_candidates_are_bbox_only():
    with pytest.raises(ValueError):
        candidate("Signatures", "John Hancock")
    sig = PIICandidate("s", "Signatures", "", (Location(0, BoundingBox(1, 1, 30, 10)),), 0.5)
    assert sig.value == ""


def test_candidate_rejects_unknown_category():
    with pytest.raises(ValueError):
        candidate("SocialSecurity", "123-45-6789")
