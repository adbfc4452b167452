"""Task pipelines: pre-actions, one provider call plus one fallback, post-actions, cost."""

from __future__ import annotations

import json
import string
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from pathlib import Path

import jsonschema
import numpy as np

from .audit import AuditLog
from .datafiles import data_path
from .docmodel import BoundingBox, DocumentBundle, document_text
from .providers import ProviderError, ProviderRequest, ProviderResponse

TASK_KINDS = ("extraction", "pii_detection", "visual_detection")
PRE_KINDS = ("render_page", "crop_region_of_interest", "build_prompt")
POST_KINDS = ("schema_validate", "heuristic_filter", "normalize")

MICRO = 1_000_000


class ConfigError(Exception):
    """TaskConfig violates its structural invariants."""


class InvalidResponseError(Exception):
    """Provider answered, but the content failed validation (empty, non-JSON, off-schema)."""


class TaskFailed(Exception):
    """Both attempts failed; carries the per-attempt diagnostics."""

    def __init__(self, task_kind: str, doc_id: str, attempts_log: list["AttemptRecord"]):
        self.task_kind = task_kind
        self.doc_id = doc_id
        self.attempts_log = attempts_log
        details = "; ".join(f"attempt {a.attempt} [{a.failure_kind}] {a.detail}" for a in attempts_log)
        super().__init__(f"{task_kind} on {doc_id} failed after {len(attempts_log)} attempts: {details}")


# ---------------------------------------------------------------------------
# Money: exact rates, integer micro-dollar costs

def parse_rate(text: str) -> Fraction:
    """Rates written as "0.027/5500" (dollars per N units) or a plain decimal."""
    num, _, den = text.partition("/")
    rate = Fraction(num.strip())
    if den:
        rate /= Fraction(den.strip())
    return rate


def quantize_micro(amount: Fraction) -> int:
    """Exact dollars to integer micro-dollars, round-half-even."""
    return round(amount * MICRO)


def dollars(micro: int) -> Decimal:
    return Decimal(micro) / MICRO


@dataclass(frozen=True)
class ProviderPath:
    path_id: str
    provider_id: str
    model_tier: str
    input_rate: Fraction
    output_rate: Fraction
    per_call_fee: Fraction

    def __post_init__(self) -> None:
        if min(self.input_rate, self.output_rate, self.per_call_fee) < 0:
            raise ValueError("rates must be non-negative")


def load_provider_paths(path: str | Path | None = None) -> dict[str, ProviderPath]:
    source = Path(path) if path is not None else data_path("provider_paths.json")
    raw = json.loads(source.read_text(encoding="utf-8"))
    paths = {}
    for path_id, entry in raw.items():
        paths[path_id] = ProviderPath(
            path_id=path_id,
            provider_id=entry["provider_id"],
            model_tier=entry["model_tier"],
            input_rate=parse_rate(entry["input_rate"]),
            output_rate=parse_rate(entry["output_rate"]),
            per_call_fee=parse_rate(entry["per_call_fee"]),
        )
    return paths


@dataclass(frozen=True)
class CostRecord:
    """All monetary fields are integer micro-dollars; one call per response."""

    input_tokens: int
    output_tokens: int
    calls: int
    input_cost: int
    output_cost: int
    call_cost: int
    total: int
    path: str
    attempts: int = 1

    def __post_init__(self) -> None:
        if self.total != self.input_cost + self.output_cost + self.call_cost:
            raise ValueError("total must equal the sum of its components")
        if self.attempts not in (1, 2):
            raise ValueError("attempts must be 1 or 2")

    @property
    def total_dollars(self) -> Decimal:
        return dollars(self.total)


def account_cost(responses: list[ProviderResponse], path: ProviderPath) -> CostRecord:
    """Price a batch of responses against one path; components quantized separately."""
    in_tokens = sum(r.input_tokens for r in responses)
    out_tokens = sum(r.output_tokens for r in responses)
    calls = len(responses)
    input_cost = quantize_micro(in_tokens * path.input_rate)
    output_cost = quantize_micro(out_tokens * path.output_rate)
    call_cost = quantize_micro(calls * path.per_call_fee)
    return CostRecord(
        input_tokens=in_tokens,
        output_tokens=out_tokens,
        calls=calls,
        input_cost=input_cost,
        output_cost=output_cost,
        call_cost=call_cost,
        total=input_cost + output_cost + call_cost,
        path=path.path_id,
    )


def combine_costs(records: list[CostRecord], attempts: int | None = None) -> CostRecord:
    if not records:
        raise ValueError("nothing to combine")
    ids = []
    for rec in records:
        if rec.path not in ids:
            ids.append(rec.path)
    return CostRecord(
        input_tokens=sum(r.input_tokens for r in records),
        output_tokens=sum(r.output_tokens for r in records),
        calls=sum(r.calls for r in records),
        input_cost=sum(r.input_cost for r in records),
        output_cost=sum(r.output_cost for r in records),
        call_cost=sum(r.call_cost for r in records),
        total=sum(r.total for r in records),
        path="+".join(ids),
        attempts=attempts if attempts is not None else len(records),
    )


# ---------------------------------------------------------------------------
# Task configuration

@dataclass(frozen=True)
class PreAction:
    kind: str
    parameters: dict

    def produced_variables(self) -> set[str]:
        if self.kind == "render_page":
            return {"page_index"}
        if self.kind == "build_prompt":
            return set(self.parameters["variables"])
        return set()


@dataclass(frozen=True)
class PostAction:
    kind: str
    parameters: dict


# Variables build_prompt knows how to bind from the bundle and config.
BINDABLE_VARIABLES = ("doc_id", "document_text", "field_names", "schema_id", "categories")


@dataclass(frozen=True)
class TaskConfig:
    task_kind: str
    pre_actions: tuple[PreAction, ...]
    prompt_template: str
    fallback_prompt_template: str
    post_actions: tuple[PostAction, ...]
    provider_path: ProviderPath
    fallback_provider_path: ProviderPath
    response_schema: str
    metadata_schema: object = None  # extraction.MetadataSchema for extraction tasks

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if self.task_kind not in TASK_KINDS:
            raise ConfigError(f"unknown task_kind {self.task_kind!r}")
        if not self.fallback_prompt_template:
            raise ConfigError("fallback prompt template required (retry is always enabled)")
        for action in self.pre_actions:
            if action.kind not in PRE_KINDS:
                raise ConfigError(f"unknown pre-action {action.kind!r}")
            _check_pre_parameters(action)
        for action in self.post_actions:
            if action.kind not in POST_KINDS:
                raise ConfigError(f"unknown post-action {action.kind!r}")
            _check_post_parameters(action)
        produced: set[str] = set()
        for action in self.pre_actions:
            produced |= action.produced_variables()
        for template in (self.prompt_template, self.fallback_prompt_template):
            for placeholder in _placeholders(template):
                if placeholder not in produced:
                    raise ConfigError(f"template placeholder {{{placeholder}}} not produced by any pre-action")
        validate_idx = [i for i, a in enumerate(self.post_actions) if a.kind == "schema_validate"]
        consumer_idx = [i for i, a in enumerate(self.post_actions) if a.kind != "schema_validate"]
        if not validate_idx:
            raise ConfigError("post_actions must include schema_validate")
        if consumer_idx and min(consumer_idx) < min(validate_idx):
            raise ConfigError("schema_validate must precede consumers of structured output")
        if self.task_kind == "extraction" and self.metadata_schema is None:
            raise ConfigError("extraction tasks need a metadata schema")


def _placeholders(template: str) -> set[str]:
    names = set()
    for _, name, _, _ in string.Formatter().parse(template):
        if name is not None:
            if not name or not name.isidentifier():
                raise ConfigError(f"bad placeholder {name!r} in template")
            names.add(name)
    return names


def _check_pre_parameters(action: PreAction) -> None:
    p = action.parameters
    if action.kind == "render_page":
        if "page" not in p or not (p["page"] == "all" or isinstance(p["page"], int)):
            raise ConfigError("render_page needs page: index or \"all\"")
    elif action.kind == "crop_region_of_interest":
        if ("bbox" in p) == ("locator" in p):
            raise ConfigError("crop_region_of_interest needs exactly one of bbox/locator")
        if "locator" in p and p["locator"] not in LOCATORS:
            raise ConfigError(f"unknown locator {p['locator']!r}")
    elif action.kind == "build_prompt":
        variables = p.get("variables")
        if not isinstance(variables, list) or not variables:
            raise ConfigError("build_prompt needs a non-empty variables list")
        unknown = [v for v in variables if v not in BINDABLE_VARIABLES]
        if unknown:
            raise ConfigError(f"build_prompt cannot bind {unknown}")


def _check_post_parameters(action: PostAction) -> None:
    p = action.parameters
    needed = {"schema_validate": "schema_id", "heuristic_filter": "rule_id", "normalize": "normalizer_id"}
    key = needed[action.kind]
    if key not in p:
        raise ConfigError(f"{action.kind} needs parameter {key}")
    if action.kind == "heuristic_filter" and p["rule_id"] not in FILTER_RULES:
        raise ConfigError(f"unknown filter rule {p['rule_id']!r}")
    if action.kind == "normalize" and p["normalizer_id"] not in NORMALIZERS:
        raise ConfigError(f"unknown normalizer {p['normalizer_id']!r}")


def load_task_config(
    name_or_path: str | Path,
    provider_paths: dict[str, ProviderPath] | None = None,
    provider_path_id: str | None = None,
    fallback_provider_path_id: str | None = None,
) -> TaskConfig:
    """Load a task file by name (packaged under data/tasks) or explicit path."""
    candidate = Path(name_or_path)
    source = candidate if candidate.suffix == ".json" and candidate.exists() else data_path("tasks", f"{name_or_path}.json")
    raw = json.loads(source.read_text(encoding="utf-8"))
    paths = provider_paths if provider_paths is not None else load_provider_paths()
    primary_id = provider_path_id or raw["provider_path"]
    fallback_id = fallback_provider_path_id or raw.get("fallback_provider_path", primary_id)
    metadata_schema = None
    if raw.get("metadata_schema"):
        from .extraction import load_metadata_schema

        schema_file = Path(raw["metadata_schema"])
        if not schema_file.is_absolute():
            schema_file = source.parent / schema_file
        metadata_schema = load_metadata_schema(schema_file)
    return TaskConfig(
        task_kind=raw["task_kind"],
        pre_actions=tuple(PreAction(a["kind"], a.get("parameters", {})) for a in raw["pre_actions"]),
        prompt_template=raw["prompt_template"],
        fallback_prompt_template=raw["fallback_prompt_template"],
        post_actions=tuple(PostAction(a["kind"], a.get("parameters", {})) for a in raw["post_actions"]),
        provider_path=paths[primary_id],
        fallback_provider_path=paths[fallback_id],
        response_schema=raw["response_schema"],
        metadata_schema=metadata_schema,
    )


# ---------------------------------------------------------------------------
# Pre-actions

def _locate_content(image: np.ndarray) -> BoundingBox:
    """Bounding box of non-background ink, padded; whole page when blank."""
    ys, xs = np.nonzero(image < 250)
    if len(xs) == 0:
        return BoundingBox(0, 0, image.shape[1], image.shape[0])
    pad = 5
    x0 = max(int(xs.min()) - pad, 0)
    y0 = max(int(ys.min()) - pad, 0)
    x1 = min(int(xs.max()) + 1 + pad, image.shape[1])
    y1 = min(int(ys.max()) + 1 + pad, image.shape[0])
    return BoundingBox(x0, y0, x1 - x0, y1 - y0)


LOCATORS = {"content": _locate_content}


def _bind_variable(name: str, bundle: DocumentBundle, config: TaskConfig) -> str:
    if name == "doc_id":
        return bundle.doc_id
    if name == "document_text":
        return document_text(bundle)
    if name == "schema_id":
        return config.response_schema
    if name == "field_names":
        return ", ".join(f.name for f in config.metadata_schema.fields)
    if name == "categories":
        from .pii import CATEGORIES

        return ", ".join(CATEGORIES)
    raise ConfigError(f"no binding for variable {name!r}")


def run_pre_actions(bundle: DocumentBundle, config: TaskConfig) -> tuple[dict[str, str], list[np.ndarray]]:
    env: dict[str, str] = {}
    images: list[np.ndarray] = []
    for action in config.pre_actions:
        p = action.parameters
        if action.kind == "render_page":
            if p["page"] == "all":
                indices = range(len(bundle.pages))
            else:
                if not (0 <= p["page"] < len(bundle.pages)):
                    raise ConfigError(f"render_page index {p['page']} out of range")
                indices = [p["page"]]
            for i in indices:
                images.append(bundle.pages[i].image)
                env["page_index"] = str(i)
        elif action.kind == "crop_region_of_interest":
            if not images:
                raise ConfigError("crop_region_of_interest needs a rendered page first")
            image = images[-1]
            if "bbox" in p:
                x, y, w, h = (int(v) for v in p["bbox"])
                box = BoundingBox(x, y, w, h)
                if box.right > image.shape[1] or box.bottom > image.shape[0]:
                    raise ConfigError(f"crop bbox {p['bbox']} exceeds the page")
            else:
                box = LOCATORS[p["locator"]](image)
            images[-1] = image[box.y : box.bottom, box.x : box.right]
        else:  # build_prompt
            for name in p["variables"]:
                env[name] = _bind_variable(name, bundle, config)
    return env, images


# ---------------------------------------------------------------------------
# Post-actions

_SCHEMA_CACHE: dict[str, dict] = {}


def load_response_schema(schema_id: str) -> dict:
    if schema_id not in _SCHEMA_CACHE:
        source = data_path("schemas", f"{schema_id}.schema.json")
        _SCHEMA_CACHE[schema_id] = json.loads(source.read_text(encoding="utf-8"))
    return _SCHEMA_CACHE[schema_id]


def _field_text(entry) -> str:
    return entry if isinstance(entry, str) else entry.get("value", "")


def _drop_empty_fields(payload: dict) -> dict:
    fields = {k: v for k, v in payload.get("fields", {}).items() if _field_text(v).strip()}
    return {**payload, "fields": fields}


def _drop_empty_text_values(payload: dict) -> dict:
    kept = [
        c for c in payload.get("candidates", [])
        if c.get("category") == "Signatures" or str(c.get("value", "")).strip()
    ]
    return {**payload, "candidates": kept}


def _drop_degenerate_boxes(payload: dict) -> dict:
    kept = []
    for det in payload.get("detections", []):
        _, _, w, h = det["bbox"]
        if w > 0 and h > 0:
            kept.append(det)
    return {**payload, "detections": kept}


def _trim_fields(payload: dict) -> dict:
    fields = {}
    for name, entry in payload.get("fields", {}).items():
        if isinstance(entry, str):
            fields[name] = entry.strip()
        else:
            fields[name] = {**entry, "value": str(entry.get("value", "")).strip()}
    return {**payload, "fields": fields}


def _trim_values(payload: dict) -> dict:
    candidates = [{**c, "value": str(c.get("value", "")).strip()} for c in payload.get("candidates", [])]
    return {**payload, "candidates": candidates}


def _round_boxes(payload: dict) -> dict:
    out = dict(payload)
    for key in ("candidates", "detections"):
        if key in out:
            items = []
            for item in out[key]:
                if item.get("bbox") is not None:
                    item = {**item, "bbox": [int(round(float(v))) for v in item["bbox"]]}
                items.append(item)
            out[key] = items
    return out


FILTER_RULES = {
    "drop_empty_fields": _drop_empty_fields,
    "drop_empty_text_values": _drop_empty_text_values,
    "drop_degenerate_boxes": _drop_degenerate_boxes,
}

NORMALIZERS = {
    "trim_fields": _trim_fields,
    "trim_values": _trim_values,
    "round_boxes": _round_boxes,
}


def run_post_actions(payload: dict, config: TaskConfig) -> dict:
    for action in config.post_actions:
        if action.kind == "schema_validate":
            schema = load_response_schema(action.parameters["schema_id"])
            try:
                jsonschema.validate(payload, schema)
            except jsonschema.ValidationError as exc:
                raise InvalidResponseError(f"schema {action.parameters['schema_id']}: {exc.message}") from exc
        elif action.kind == "heuristic_filter":
            payload = FILTER_RULES[action.parameters["rule_id"]](payload)
        else:
            payload = NORMALIZERS[action.parameters["normalizer_id"]](payload)
    return payload


def _parse_suggestions(payload: dict, config: TaskConfig) -> list:
    if config.task_kind == "extraction":
        from .extraction import parse_suggestions

        return parse_suggestions(payload, config.metadata_schema)
    if config.task_kind == "pii_detection":
        from .pii import parse_candidate_drafts

        return parse_candidate_drafts(payload)
    from .vischeck import parse_detections

    return parse_detections(payload)


# ---------------------------------------------------------------------------
# Execution

@dataclass(frozen=True)
class AttemptRecord:
    attempt: int
    path: str
    prompt_kind: str  # primary | fallback
    outcome: str  # accepted | failed
    failure_kind: str | None = None  # transport | invalid_response
    detail: str | None = None


@dataclass(frozen=True)
class TaskResult:
    suggestions: list
    cost: CostRecord
    attempts_log: list[AttemptRecord]
    audit_refs: list[int] = field(default_factory=list)


def run_task(bundle: DocumentBundle, config: TaskConfig, provider, audit: AuditLog) -> TaskResult:
    """Pre-actions, one provider call with at most one fallback retry, post-actions."""
    refs = []
    event = audit.append(
        "system",
        "task_requested",
        {"doc_id": bundle.doc_id, "task_kind": config.task_kind, "path": config.provider_path.path_id},
    )
    refs.append(event.seq)
    env, images = run_pre_actions(bundle, config)

    attempts_log: list[AttemptRecord] = []
    priced: list[tuple[ProviderResponse, ProviderPath]] = []
    suggestions = None
    for attempt in (1, 2):
        template = config.prompt_template if attempt == 1 else config.fallback_prompt_template
        path = config.provider_path if attempt == 1 else config.fallback_provider_path
        prompt_kind = "primary" if attempt == 1 else "fallback"
        prompt = template.format(**env)
        request = ProviderRequest(
            prompt=prompt,
            images=tuple(images),
            schema_id=config.response_schema,
            model_tier=path.model_tier,
            task_kind=config.task_kind,
            doc_id=bundle.doc_id,
            attempt=attempt,
        )
        failure_kind = None
        detail = None
        try:
            response = provider.invoke(request)
            priced.append((response, path))
            if not response.raw_text.strip():
                raise InvalidResponseError("empty raw_text")
            try:
                payload = json.loads(response.raw_text)
            except json.JSONDecodeError as exc:
                raise InvalidResponseError(f"response is not valid JSON: {exc}") from exc
            if not isinstance(payload, dict):
                raise InvalidResponseError("response JSON is not an object")
            payload = run_post_actions(payload, config)
            suggestions = _parse_suggestions(payload, config)
        except ProviderError as exc:
            failure_kind, detail = "transport", str(exc)
        except InvalidResponseError as exc:
            failure_kind, detail = "invalid_response", str(exc)
        if failure_kind is None:
            attempts_log.append(AttemptRecord(attempt, path.path_id, prompt_kind, "accepted"))
            event = audit.append(
                "system",
                "task_attempt",
                {"doc_id": bundle.doc_id, "task_kind": config.task_kind, "attempt": attempt,
                 "prompt_kind": prompt_kind, "outcome": "accepted",
                 "input_tokens": priced[-1][0].input_tokens, "output_tokens": priced[-1][0].output_tokens},
            )
            refs.append(event.seq)
            break
        attempts_log.append(AttemptRecord(attempt, path.path_id, prompt_kind, "failed", failure_kind, detail))
        event = audit.append(
            "system",
            "task_attempt",
            {"doc_id": bundle.doc_id, "task_kind": config.task_kind, "attempt": attempt,
             "prompt_kind": prompt_kind, "outcome": "failed", "failure_kind": failure_kind, "detail": detail},
        )
        refs.append(event.seq)

    per_attempt = [account_cost([r], p) for r, p in priced]
    if per_attempt:
        cost = combine_costs(per_attempt, attempts=len(attempts_log))
    else:  # both attempts died in transport: nothing billable
        cost = account_cost([], config.provider_path)

    if suggestions is None:
        event = audit.append(
            "system",
            "task_failed",
            {"doc_id": bundle.doc_id, "task_kind": config.task_kind,
             "attempts": [
                 {"attempt": a.attempt, "failure_kind": a.failure_kind, "detail": a.detail}
                 for a in attempts_log
             ]},
        )
        refs.append(event.seq)
        raise TaskFailed(config.task_kind, bundle.doc_id, attempts_log)

    event = audit.append(
        "system",
        "task_completed",
        {"doc_id": bundle.doc_id, "task_kind": config.task_kind, "attempts": len(attempts_log),
         "suggestions": len(suggestions), "total_cost_micro": cost.total},
    )
    refs.append(event.seq)
    return TaskResult(suggestions=suggestions, cost=cost, attempts_log=attempts_log, audit_refs=refs)
