"""Provider adapters: scripted mock fixtures and a remote HTTP stub client."""

from __future__ import annotations

import base64
import io
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ENV_PROVIDER_URL = "PLANINTEL_PROVIDER_URL"
ENV_PROVIDER_TOKEN = "PLANINTEL_PROVIDER_TOKEN"

MODEL_TIERS = ("mini", "standard")


class ProviderError(Exception):
    """Base for anything the provider layer can raise."""


class ProviderTransportError(ProviderError):
    """The call never produced a usable envelope (network, timeout, scripted outage)."""


class NoScriptError(ProviderError):
    """Mock fixture missing for the requested key; never fabricate a response."""


class MalformedEnvelopeError(ProviderError):
    """Remote answered, but the envelope is missing required fields."""


@dataclass(frozen=True)
class ProviderRequest:
    """One provider invocation, plus the routing metadata fixtures key on."""

    prompt: str
    images: tuple[np.ndarray, ...]
    schema_id: str
    model_tier: str
    task_kind: str
    doc_id: str
    attempt: int

    def __post_init__(self) -> None:
        if not self.prompt and not self.images:
            raise ValueError("request needs a prompt or at least one image")
        if self.model_tier not in MODEL_TIERS:
            raise ValueError(f"unknown model tier {self.model_tier!r}")
        if self.attempt not in (1, 2):
            raise ValueError("attempt must be 1 or 2")


@dataclass(frozen=True)
class ProviderResponse:
    raw_text: str
    input_tokens: int
    output_tokens: int
    tool_calls: int = 0
    latency_ms: float = 0.0

    def __post_init__(self) -> None:
        if min(self.input_tokens, self.output_tokens, self.tool_calls) < 0:
            raise ValueError("token and call counts must be non-negative")


class MockProvider:
    """Replays scripted responses from a fixtures directory.

    Lookup order for a request: `<dir>/<doc_id>/<task_kind>_attempt<N>.json`,
    then `<dir>/<task_kind>_attempt<N>.json`. A miss raises NoScriptError.
    A fixture with an "error" key raises a scripted transport failure instead.
    """

    def __init__(self, fixtures_dir: str | Path):
        self.fixtures_dir = Path(fixtures_dir)
        if not self.fixtures_dir.is_dir():
            raise FileNotFoundError(f"fixtures directory missing: {self.fixtures_dir}")

    def _fixture_path(self, request: ProviderRequest) -> Path:
        name = f"{request.task_kind}_attempt{request.attempt}.json"
        for candidate in (self.fixtures_dir / request.doc_id / name, self.fixtures_dir / name):
            if candidate.is_file():
                return candidate
        raise NoScriptError(
            f"no fixture for doc_id={request.doc_id!r} task={request.task_kind!r} "
            f"attempt={request.attempt} under {self.fixtures_dir}"
        )

    def invoke(self, request: ProviderRequest) -> ProviderResponse:
        data = json.loads(self._fixture_path(request).read_text(encoding="utf-8"))
        if "error" in data:
            raise ProviderTransportError(str(data.get("message", data["error"])))
        raw_text = data.get("raw_text")
        if raw_text is None and "payload" in data:
            raw_text = json.dumps(data["payload"])
        if raw_text is None:
            raise MalformedEnvelopeError(f"fixture {self._fixture_path(request)} has no raw_text/payload")
        return ProviderResponse(
            raw_text=raw_text,
            input_tokens=int(data.get("input_tokens", 0)),
            output_tokens=int(data.get("output_tokens", 0)),
            tool_calls=int(data.get("tool_calls", 0)),
            latency_ms=float(data.get("latency_ms", 0.0)),
        )


def encode_image(image: np.ndarray) -> str:
    """Grayscale raster to base64 PNG for the wire."""
    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(image, mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


class RemoteProvider:
    """Adapter for the stub-server wire format.

    POST {base_url}/invoke with {prompt, images (base64 PNG), schema_id, model_tier};
    expects {raw_text, input_tokens, output_tokens, tool_calls?} back.
    """

    def __init__(self, base_url: str | None = None, timeout: float = 60.0):
        self.base_url = (base_url or os.environ.get(ENV_PROVIDER_URL, "")).rstrip("/")
        if not self.base_url:
            raise ValueError(f"no provider URL given and {ENV_PROVIDER_URL} unset")
        self.timeout = timeout
        self.token = os.environ.get(ENV_PROVIDER_TOKEN)

    def invoke(self, request: ProviderRequest) -> ProviderResponse:
        import httpx

        body = {
            "prompt": request.prompt,
            "images": [encode_image(img) for img in request.images],
            "schema_id": request.schema_id,
            "model_tier": request.model_tier,
        }
        headers = {"Authorization": f"Bearer {self.token}"} if self.token else {}
        started = time.monotonic()
        try:
            reply = httpx.post(f"{self.base_url}/invoke", json=body, headers=headers, timeout=self.timeout)
            reply.raise_for_status()
            envelope = reply.json()
        except httpx.HTTPError as exc:
            raise ProviderTransportError(str(exc)) from exc
        except ValueError as exc:
            raise MalformedEnvelopeError(f"provider returned non-JSON body: {exc}") from exc
        elapsed_ms = (time.monotonic() - started) * 1000.0
        missing = [k for k in ("raw_text", "input_tokens", "output_tokens") if k not in envelope]
        if missing:
            raise MalformedEnvelopeError(f"envelope missing fields: {missing}")
        return ProviderResponse(
            raw_text=str(envelope["raw_text"]),
            input_tokens=int(envelope["input_tokens"]),
            output_tokens=int(envelope["output_tokens"]),
            tool_calls=int(envelope.get("tool_calls", 0)),
            latency_ms=elapsed_ms,
        )


@dataclass
class RecordingProvider:
    """Wraps another provider and keeps every request it saw; test aid."""

    inner: object
    requests: list[ProviderRequest] = field(default_factory=list)

    def invoke(self, request: ProviderRequest) -> ProviderResponse:
        self.requests.append(request)
        return self.inner.invoke(request)
