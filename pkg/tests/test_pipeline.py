import json
from decimal import Decimal
from fractions import Fraction

import pytest

from conftest import make_bundle
from planintel.pipeline import (
    ConfigError,
    CostRecord,
    PreAction,
    PostAction,
    TaskConfig,
    TaskFailed,
    account_cost,
    combine_costs,
    load_provider_paths,
    load_task_config,
    parse_rate,
    quantize_micro,
    run_pre_actions,
    run_task,
)
from planintel.providers import (
    MockProvider,
    NoScriptError,
    ProviderRequest,
    ProviderResponse,
    ProviderTransportError,
    RecordingProvider,
)


# ---------------------------------------------------------------------------
# cost arithmetic


def test_parse_rate_forms():
    assert parse_rate("0.027/5500") == Fraction(27, 1000) / 5500
    assert parse_rate("0.001") == Fraction(1, 1000)
    assert parse_rate(" 0.015 / 5500 ") == Fraction(15, 1000) / 5500


def test_quantize_micro_is_half_even():
    # 0.5 / 1.5 / 2.5 micro-dollars round to 0 / 2 / 2
    assert quantize_micro(Fraction(1, 2_000_000)) == 0
    assert quantize_micro(Fraction(3, 2_000_000)) == 2
    assert quantize_micro(Fraction(5, 2_000_000)) == 2
    assert quantize_micro(Fraction(46, 1000)) == 46_000


def test_rates_stay_exact_over_token_counts():
    # 5500 tokens at 0.027/5500 must come out at exactly 27000 micro, and the
    # rate must survive being applied one token at a time.
    rate = parse_rate("0.027/5500")
    assert quantize_micro(5500 * rate) == 27_000
    assert sum(rate for _ in range(5500)) == Fraction(27, 1000)


def response(in_tokens, out_tokens):
    return ProviderResponse(raw_text="{}", input_tokens=in_tokens, output_tokens=out_tokens)


def test_account_cost_standard_batch():
    paths = load_provider_paths()
    batch = [response(1000, 200)] * 5 + [response(500, 200)]
    record = account_cost(batch, paths["standard"])
    assert (record.input_tokens, record.output_tokens, record.calls) == (5500, 1200, 6)
    assert record.input_cost == 27_000
    assert record.output_cost == 18_000
    assert record.call_cost == 1_000
    assert record.total == 46_000
    assert record.total_dollars == Decimal("0.046")


def test_account_cost_mini_batch_and_combination():
    paths = load_provider_paths()
    batch = [response(1000, 200)] * 5 + [response(500, 200)]
    mini = account_cost(batch, paths["mini"])
    assert mini.total == 25_000
    standard = account_cost(batch, paths["standard"])
    both = combine_costs([mini, standard])
    assert both.total == 71_000
    assert both.total_dollars == Decimal("0.071")
    assert both.path == "mini+standard"
    assert both.attempts == 2
    assert both.calls == 12


def test_account_cost_empty_batch_is_free():
    paths = load_provider_paths()
    record = account_cost([], paths["standard"])
    assert record.total == 0
    assert record.calls == 0


def test_combine_costs_requires_records():
    with pytest.raises(ValueError):
        combine_costs([])


def test_cost_record_invariants():
    with pytest.raises(ValueError):
        CostRecord(1, 1, 1, 10, 10, 10, 31, "standard")
    with pytest.raises(ValueError):
        CostRecord(1, 1, 1, 10, 10, 10, 30, "standard", attempts=3)


def test_load_provider_paths_parses_fractions():
    paths = load_provider_paths()
    assert set(paths) == {"standard", "mini"}
    assert paths["standard"].input_rate == Fraction(27, 1000) / 5500
    assert paths["mini"].model_tier == "mini"


# ---------------------------------------------------------------------------
# task configuration


def test_load_packaged_task_configs():
    for name in ("extraction", "pii_detection", "visual_detection"):
        config = load_task_config(name)
        assert config.task_kind == name
        assert config.fallback_prompt_template
        assert any(a.kind == "schema_validate" for a in config.post_actions)
    assert load_task_config("extraction").metadata_schema is not None


def minimal_config(**overrides):
    paths = load_provider_paths()
    base = dict(
        task_kind="pii_detection",
        pre_actions=(
            PreAction("render_page", {"page": 0}),
            PreAction("build_prompt", {"variables": ["doc_id", "document_text"]}),
        ),
        prompt_template="{doc_id}: {document_text}",
        fallback_prompt_template="again {doc_id}",
        post_actions=(PostAction("schema_validate", {"schema_id": "pii_detection"}),),
        provider_path=paths["standard"],
        fallback_provider_path=paths["mini"],
        response_schema="pii_detection",
    )
    base.update(overrides)
    return TaskConfig(**base)


def test_config_rejects_unbound_placeholder():
    with pytest.raises(ConfigError):
        minimal_config(prompt_template="{doc_id} {oops}")


def test_config_requires_schema_validate():
    with pytest.raises(ConfigError):
        minimal_config(post_actions=(PostAction("normalize", {"normalizer_id": "trim_values"}),))


def test_config_schema_validate_must_come_first():
    with pytest.raises(ConfigError):
        minimal_config(
            post_actions=(
                PostAction("normalize", {"normalizer_id": "trim_values"}),
                PostAction("schema_validate", {"schema_id": "pii_detection"}),
            )
        )


def test_config_rejects_unknown_kinds():
    with pytest.raises(ConfigError):
        minimal_config(task_kind="summarize")
    with pytest.raises(ConfigError):
        minimal_config(pre_actions=(PreAction("ocr", {}),))
    with pytest.raises(ConfigError):
        minimal_config(fallback_prompt_template="")


# ---------------------------------------------------------------------------
# mock provider


def extraction_payload():
    return {
        "fields": {
            "Title": {"value": "Site Plan", "confidence": 0.9, "source_spans": ["s0-0"]},
            "Date": {"value": "14 March 2024", "confidence": 0.85, "source_spans": ["s0-1"]},
        }
    }


def write_fixture(path, data):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data), encoding="utf-8")


def request(doc_id="doc-1", attempt=1, task="extraction"):
    return ProviderRequest(
        prompt="p", images=(), schema_id="extraction", model_tier="standard",
        task_kind=task, doc_id=doc_id, attempt=attempt,
    )


def test_mock_provider_prefers_doc_specific_fixture(tmp_path):
    write_fixture(tmp_path / "extraction_attempt1.json",
                  {"payload": {"fields": {}}, "input_tokens": 1, "output_tokens": 1})
    write_fixture(tmp_path / "doc-1" / "extraction_attempt1.json",
                  {"payload": extraction_payload(), "input_tokens": 9, "output_tokens": 9})
    provider = MockProvider(tmp_path)
    specific = provider.invoke(request("doc-1"))
    assert specific.input_tokens == 9
    shared = provider.invoke(request("doc-2"))
    assert shared.input_tokens == 1


def test_mock_provider_payload_convenience(tmp_path):
    write_fixture(tmp_path / "extraction_attempt1.json", {"payload": {"fields": {"Title": "x"}}})
    out = MockProvider(tmp_path).invoke(request())
    assert json.loads(out.raw_text) == {"fields": {"Title": "x"}}


def test_mock_provider_scripted_outage(tmp_path):
    write_fixture(tmp_path / "extraction_attempt1.json", {"error": "outage", "message": "scripted outage"})
    with pytest.raises(ProviderTransportError, match="scripted outage"):
        MockProvider(tmp_path).invoke(request())


def test_mock_provider_never_fabricates(tmp_path):
    with pytest.raises(NoScriptError):
        MockProvider(tmp_path).invoke(request())
    with pytest.raises(FileNotFoundError):
        MockProvider(tmp_path / "missing")


def test_provider_request_validation():
    with pytest.raises(ValueError):
        ProviderRequest("", (), "s", "standard", "extraction", "d", 1)
    with pytest.raises(ValueError):
        ProviderRequest("p", (), "s", "turbo", "extraction", "d", 1)
    with pytest.raises(ValueError):
        ProviderRequest("p", (), "s", "standard", "extraction", "d", 3)


# ---------------------------------------------------------------------------
# run_task


@pytest.fixture
def extraction_bundle():
    return make_bundle(texts=["Site Plan", "14 March 2024", "Scale 1:1250"])


@pytest.fixture
def config():
    return load_task_config("extraction")


def run(tmp_path, bundle, config, audit, fixtures):
    for name, data in fixtures.items():
        write_fixture(tmp_path / "scripts" / name, data)
    provider = RecordingProvider(MockProvider(tmp_path / "scripts"))
    return run_task(bundle, config, provider, audit), provider


def test_run_task_happy_path(tmp_path, extraction_bundle, config, audit_log):
    result, provider = run(
        tmp_path, extraction_bundle, config, audit_log,
        {"extraction_attempt1.json": {"payload": extraction_payload(),
                                      "input_tokens": 800, "output_tokens": 150}},
    )
    names = [s.field_name for s in result.suggestions]
    assert "Title" in names and "Date" in names
    assert [a.outcome for a in result.attempts_log] == ["accepted"]
    assert result.attempts_log[0].prompt_kind == "primary"
    assert result.cost.path == "standard"
    assert result.cost.attempts == 1
    assert result.cost.input_tokens == 800

    actions = [e.action for e in audit_log.query()]
    assert actions == ["task_requested", "task_attempt", "task_completed"]
    completed = audit_log.query(action="task_completed")[0]
    assert completed.payload["total_cost_micro"] == result.cost.total
    attempt = audit_log.query(action="task_attempt")[0]
    assert attempt.payload["outcome"] == "accepted"
    assert attempt.payload["input_tokens"] == 800
    # the document text made it into the prompt
    assert "Site Plan" in provider.requests[0].prompt


def test_run_task_falls_back_on_invalid_response(tmp_path, extraction_bundle, config, audit_log):
    result, provider = run(
        tmp_path, extraction_bundle, config, audit_log,
        {
            "extraction_attempt1.json": {"raw_text": "sorry, here is prose",
                                         "input_tokens": 700, "output_tokens": 40},
            "extraction_attempt2.json": {"payload": extraction_payload(),
                                         "input_tokens": 900, "output_tokens": 160},
        },
    )
    assert [(a.prompt_kind, a.outcome) for a in result.attempts_log] == [
        ("primary", "failed"),
        ("fallback", "accepted"),
    ]
    assert result.attempts_log[0].failure_kind == "invalid_response"
    # both attempts reached the provider and both are billed
    assert result.cost.attempts == 2
    assert result.cost.input_tokens == 1600
    assert "rejected" in provider.requests[1].prompt
    failed = audit_log.query(action="task_attempt")[0]
    assert failed.payload["failure_kind"] == "invalid_response"


def test_run_task_transport_failure_is_not_billed(tmp_path, extraction_bundle, config, audit_log):
    result, _ = run(
        tmp_path, extraction_bundle, config, audit_log,
        {
            "extraction_attempt1.json": {"error": "outage", "message": "gateway down"},
            "extraction_attempt2.json": {"payload": extraction_payload(),
                                         "input_tokens": 900, "output_tokens": 160},
        },
    )
    assert result.attempts_log[0].failure_kind == "transport"
    assert result.cost.attempts == 2
    assert result.cost.input_tokens == 900  # only the answered call carries tokens
    assert result.cost.calls == 1


def test_run_task_missing_script_triggers_fallback(tmp_path, extraction_bundle, config, audit_log):
    # no attempt-1 fixture at all: the NoScriptError counts as a transport failure
    result, _ = run(
        tmp_path, extraction_bundle, config, audit_log,
        {"extraction_attempt2.json": {"payload": extraction_payload(),
                                      "input_tokens": 900, "output_tokens": 160}},
    )
    assert [(a.attempt, a.outcome) for a in result.attempts_log] == [(1, "failed"), (2, "accepted")]
    assert result.attempts_log[0].failure_kind == "transport"


def test_run_task_both_attempts_fail(tmp_path, extraction_bundle, config, audit_log):
    with pytest.raises(TaskFailed) as exc:
        run(
            tmp_path, extraction_bundle, config, audit_log,
            {
                "extraction_attempt1.json": {"error": "outage"},
                "extraction_attempt2.json": {"raw_text": ""},
            },
        )
    failure = exc.value
    assert failure.task_kind == "extraction"
    assert failure.doc_id == extraction_bundle.doc_id
    assert [a.failure_kind for a in failure.attempts_log] == ["transport", "invalid_response"]
    assert failure.attempts_log[1].detail == "empty raw_text"
    actions = [e.action for e in audit_log.query()]
    assert actions == ["task_requested", "task_attempt", "task_attempt", "task_failed"]
    assert len(audit_log.query(action="task_failed")[0].payload["attempts"]) == 2


def test_run_task_rejects_non_object_json(tmp_path, extraction_bundle, config, audit_log):
    result, _ = run(
        tmp_path, extraction_bundle, config, audit_log,
        {
            "extraction_attempt1.json": {"raw_text": "[1, 2, 3]"},
            "extraction_attempt2.json": {"payload": extraction_payload()},
        },
    )
    assert result.attempts_log[0].failure_kind == "invalid_response"
    assert "not an object" in result.attempts_log[0].detail


def test_run_task_schema_violation_is_invalid_response(tmp_path, extraction_bundle, config, audit_log):
    result, _ = run(
        tmp_path, extraction_bundle, config, audit_log,
        {
            "extraction_attempt1.json": {"payload": {"fields": {"Title": {"value": 5}}}},
            "extraction_attempt2.json": {"payload": extraction_payload()},
        },
    )
    assert result.attempts_log[0].failure_kind == "invalid_response"
    assert "schema" in result.attempts_log[0].detail


def test_run_pre_actions_bind_template_variables(extraction_bundle):
    config = load_task_config("extraction")
    env, images = run_pre_actions(extraction_bundle, config)
    assert env["doc_id"] == extraction_bundle.doc_id
    assert "Site Plan" in env["document_text"]
    assert "Title" in env["field_names"]
    assert len(images) == 1
    assert images[0].shape == (extraction_bundle.pages[0].height, extraction_bundle.pages[0].width)
    # every placeholder in both templates is bindable
    config.prompt_template.format(**env)
    config.fallback_prompt_template.format(**env)
