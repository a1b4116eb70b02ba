"""Client for OpenAI-compatible chat-completions endpoints.

Every model dependency sits behind this wire format. A bundled in-process
mock endpoint (``mock://echo``) echoes the prompt through a template so
the whole pipeline runs offline.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import mimetypes
import os
import random
import re
import threading
import time
from collections.abc import Callable, Iterable, Iterator
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import httpx
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from patspec.enrich import DEFAULT_INSTRUCTION, assemble_input
from patspec.errors import BadResponse, EndpointError, EndpointUnreachable, Timeout
from patspec.model import TrainingSample

log = logging.getLogger(__name__)

TRANSIENT_STATUS = {408, 425, 429, 500, 502, 503, 504}


class GenerationRequest(BaseModel):
    model_config = ConfigDict(frozen=True)

    sample_id: str
    prompt: str
    image_path: str | None = None
    n_candidates: int = Field(default=1, ge=1)
    params: dict[str, Any] = Field(default_factory=dict)


class GenerationResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    sample_id: str
    candidates: list[str] = Field(default_factory=list)
    latency_ms: float = 0.0
    endpoint_id: str = ""
    error: str | None = None


@dataclass
class EndpointConfig:
    base_url: str
    model: str
    api_key_env: str | None = None
    timeout: float = 60.0
    max_attempts: int = 3
    backoff: float = 1.0
    mock_template: str = "{prompt}"
    mock_delay: tuple[float, float] = (0.0, 0.0)
    params: dict[str, Any] = field(default_factory=dict)

    @property
    def endpoint_id(self) -> str:
        return f"{self.model}@{self.base_url}"

    @property
    def is_mock(self) -> bool:
        return self.base_url.startswith("mock://")

    @classmethod
    def mock(cls, template: str = "{prompt}", **kw) -> EndpointConfig:
        return cls(base_url="mock://echo", model="template-echo", mock_template=template, **kw)

    @classmethod
    def from_file(cls, path: str | Path) -> EndpointConfig:
        """Load a JSON endpoint description (keys as in this dataclass)."""
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if "mock_delay" in data:
            data["mock_delay"] = tuple(data["mock_delay"])
        return cls(**data)


# --------------------------------------------------------------------------
# mock endpoint
# --------------------------------------------------------------------------

_TAG_BODY_RE = re.compile(r"<(cf|ctx|parent|desc|comps|cur_p|prev_p)>(.*?)</\1>", re.S)


def _prompt_fields(prompt: str) -> dict[str, str]:
    fields = {"prompt": prompt}
    for m in _TAG_BODY_RE.finditer(prompt):
        fields.setdefault(m.group(1), m.group(2))
    for k in ("cf", "ctx", "parent", "desc", "comps", "cur_p", "prev_p"):
        fields.setdefault(k, "")
    return fields


def mock_transport(template: str = "{prompt}", delay: tuple[float, float] = (0.0, 0.0), seed: int | None = None) -> httpx.MockTransport:
    """Deterministic chat-completions stand-in.

    Each of the ``n`` choices is ``template`` formatted with the text prompt,
    the bodies of its tags (``{cf}``, ``{desc}``, ``{comps}`` ...) and the
    choice ``{index}``. ``delay`` draws a random sleep per request, for
    exercising concurrency; it never changes the response body.
    """
    rng = random.Random(seed)
    lock = threading.Lock()

    def handler(request: httpx.Request) -> httpx.Response:
        body = json.loads(request.content)
        if delay[1] > 0:
            with lock:
                pause = rng.uniform(*delay)
            time.sleep(pause)
        text = ""
        for message in body.get("messages", []):
            content = message.get("content")
            if isinstance(content, str):
                text = content
            else:
                text = "".join(p.get("text", "") for p in content if p.get("type") == "text")
        fields = _prompt_fields(text)
        n = int(body.get("n", 1))
        choices = [
            {"index": i, "message": {"role": "assistant", "content": template.format(index=i, **fields)}, "finish_reason": "stop"}
            for i in range(n)
        ]
        return httpx.Response(200, json={"id": "mock", "object": "chat.completion", "model": body.get("model"), "choices": choices})

    return httpx.MockTransport(handler)


# --------------------------------------------------------------------------
# client
# --------------------------------------------------------------------------


class AuditLog:
    """Append-only JSONL audit trail; writes are serialized."""

    def __init__(self, path: str | Path | None):
        self.path = Path(path) if path else None
        self._lock = threading.Lock()

    def write(self, record: dict) -> None:
        if self.path is None:
            return
        line = json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n"
        with self._lock, open(self.path, "a", encoding="utf-8") as fh:
            fh.write(line)


def _image_part(image_path: str) -> dict:
    path = Path(image_path)
    mime = mimetypes.guess_type(path.name)[0] or "image/png"
    data = base64.b64encode(path.read_bytes()).decode("ascii")
    return {"type": "image_url", "image_url": {"url": f"data:{mime};base64,{data}"}}


def build_payload(req: GenerationRequest, endpoint: EndpointConfig, image_root: Path | None = None) -> dict:
    content: list[dict] = []
    if req.image_path:
        path = Path(req.image_path)
        if image_root is not None and not path.is_absolute():
            path = image_root / path
        content.append(_image_part(str(path)))
    content.append({"type": "text", "text": req.prompt})
    payload = {"model": endpoint.model, "messages": [{"role": "user", "content": content}], "n": req.n_candidates}
    payload.update(endpoint.params)
    payload.update(req.params)
    return payload


def _redact(payload: dict) -> dict:
    """Replace inline image data with its digest for the audit log."""
    out = json.loads(json.dumps(payload))
    for message in out.get("messages", []):
        for part in message.get("content", []) if isinstance(message.get("content"), list) else []:
            url = part.get("image_url", {}).get("url", "")
            if url.startswith("data:"):
                part["image_url"]["url"] = "sha256:" + hashlib.sha256(url.encode()).hexdigest()
    return out


class GenerationClient:
    def __init__(
        self,
        endpoint: EndpointConfig,
        transport: httpx.BaseTransport | None = None,
        audit_path: str | Path | None = None,
        image_root: str | Path | None = None,
        clock: Callable[[], float] | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.endpoint = endpoint
        builtin_mock = transport is None and endpoint.is_mock
        if builtin_mock:
            transport = mock_transport(endpoint.mock_template, endpoint.mock_delay)
        headers = {}
        key = os.environ.get(endpoint.api_key_env) if endpoint.api_key_env else None
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self._http = httpx.Client(
            base_url="http://mock" if endpoint.is_mock else endpoint.base_url,
            transport=transport,
            timeout=endpoint.timeout,
            headers=headers,
        )
        self.audit = AuditLog(audit_path)
        self.image_root = Path(image_root) if image_root else None
        # the in-process mock has no network latency to report
        self.clock = clock or ((lambda: 0.0) if builtin_mock else time.perf_counter)
        self.sleep = sleep

    def close(self) -> None:
        self._http.close()

    def __enter__(self) -> GenerationClient:
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _post(self, payload: dict) -> dict:
        last: Exception | None = None
        for attempt in range(self.endpoint.max_attempts):
            if attempt:
                self.sleep(self.endpoint.backoff * 2 ** (attempt - 1))
            try:
                resp = self._http.post("/chat/completions", json=payload)
            except httpx.TimeoutException as exc:
                last = Timeout(f"request timed out after {self.endpoint.timeout}s")
                last.__cause__ = exc
                continue
            except httpx.TransportError as exc:
                last = EndpointUnreachable(f"{self.endpoint.base_url}: {exc}")
                continue
            if resp.status_code in TRANSIENT_STATUS:
                last = EndpointUnreachable(f"{self.endpoint.base_url}: HTTP {resp.status_code}")
                continue
            if resp.status_code >= 400:
                raise BadResponse(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()
            except ValueError as exc:
                raise BadResponse("response body is not JSON") from exc
        assert last is not None
        raise last

    def generate(self, req: GenerationRequest) -> GenerationResult:
        """One chat-completions round trip, retried on transient failures."""
        payload = build_payload(req, self.endpoint, self.image_root)
        start = self.clock()
        try:
            body = self._post(payload)
        except EndpointError as exc:
            self.audit.write({"sample_id": req.sample_id, "request": _redact(payload), "error": str(exc)})
            raise
        latency = (self.clock() - start) * 1000.0
        self.audit.write({"sample_id": req.sample_id, "request": _redact(payload), "response": body})
        try:
            choices = sorted(body["choices"], key=lambda c: c.get("index", 0))
            candidates = [c["message"]["content"] for c in choices]
        except (KeyError, TypeError) as exc:
            raise BadResponse(f"non-conforming chat-completions body: {exc!r}") from exc
        if len(candidates) != req.n_candidates or not all(isinstance(c, str) for c in candidates):
            raise BadResponse(f"expected {req.n_candidates} text candidates, got {len(candidates)}")
        return GenerationResult(
            sample_id=req.sample_id, candidates=candidates, latency_ms=latency, endpoint_id=self.endpoint.endpoint_id
        )


def generate(req: GenerationRequest, endpoint: EndpointConfig, **client_kw) -> GenerationResult:
    with GenerationClient(endpoint, **client_kw) as client:
        return client.generate(req)


def request_for(sample: TrainingSample, instruction: str = DEFAULT_INSTRUCTION, n: int = 1, params: dict | None = None) -> GenerationRequest:
    return GenerationRequest(
        sample_id=sample.sample_id,
        prompt=assemble_input(sample, instruction),
        image_path=sample.image_path or None,
        n_candidates=n,
        params=params or {},
    )


def generate_batch(
    samples: Iterable[TrainingSample | dict],
    client: GenerationClient,
    instruction: str = DEFAULT_INSTRUCTION,
    n: int = 1,
    concurrency: int = 4,
) -> Iterator[GenerationResult]:
    """Generate for every sample with at most ``concurrency`` requests in flight.

    Results come back in input order. Records that fail ``TrainingSample``
    validation, and requests that fail, become error results at their position.
    """
    if concurrency < 1:
        raise ValueError("concurrency must be >= 1")

    def one(item: TrainingSample | dict) -> GenerationResult:
        try:
            sample = item if isinstance(item, TrainingSample) else TrainingSample.model_validate(item)
        except ValidationError as exc:
            sid = item.get("sample_id", "") if isinstance(item, dict) else ""
            return GenerationResult(sample_id=str(sid), endpoint_id=client.endpoint.endpoint_id, error=f"invalid sample: {exc.errors()[0]['msg']}")
        try:
            return client.generate(request_for(sample, instruction, n))
        except (EndpointError, OSError) as exc:
            return GenerationResult(
                sample_id=sample.sample_id, endpoint_id=client.endpoint.endpoint_id, error=f"{type(exc).__name__}: {exc}"
            )

    with ThreadPoolExecutor(max_workers=concurrency) as pool:
        yield from pool.map(one, samples)


# --------------------------------------------------------------------------
# embeddings for BERTScore
# --------------------------------------------------------------------------


class EndpointEmbeddingProvider:
    """Token vectors from an OpenAI-compatible ``/embeddings`` endpoint.

    Each token is embedded on its own (no context), which is what greedy
    token matching needs when the endpoint only offers pooled vectors.
    """

    def __init__(self, endpoint: EndpointConfig, transport: httpx.BaseTransport | None = None):
        self.endpoint = endpoint
        self.name = f"endpoint:{endpoint.endpoint_id}"
        key = os.environ.get(endpoint.api_key_env) if endpoint.api_key_env else None
        self._http = httpx.Client(
            base_url=endpoint.base_url,
            transport=transport,
            timeout=endpoint.timeout,
            headers={"Authorization": f"Bearer {key}"} if key else {},
        )
        self._cache: dict[str, list[float]] = {}

    def embed(self, tokens: list[str]):
        import numpy as np

        missing = sorted({t for t in tokens if t not in self._cache})
        if missing:
            try:
                resp = self._http.post("/embeddings", json={"model": self.endpoint.model, "input": missing})
            except httpx.TimeoutException as exc:
                raise Timeout(str(exc)) from exc
            except httpx.TransportError as exc:
                raise EndpointUnreachable(f"{self.endpoint.base_url}: {exc}") from exc
            if resp.status_code >= 400:
                raise BadResponse(f"HTTP {resp.status_code} from embeddings endpoint")
            try:
                rows = sorted(resp.json()["data"], key=lambda d: d["index"])
                vectors = [r["embedding"] for r in rows]
            except (ValueError, KeyError, TypeError) as exc:
                raise BadResponse(f"non-conforming embeddings body: {exc!r}") from exc
            if len(vectors) != len(missing):
                raise BadResponse(f"expected {len(missing)} embeddings, got {len(vectors)}")
            self._cache.update(zip(missing, vectors))
        if not tokens:
            return np.zeros((0, 0))
        return np.asarray([self._cache[t] for t in tokens], dtype=float)


def embedding_provider(spec: str | None):
    """``None``/``"none"``, ``"hashing"`` or a path to an endpoint JSON file."""
    from patspec.metrics.bertscore import HashingEmbeddingProvider

    if spec is None or spec.lower() == "none":
        return None
    if spec.lower() == "hashing":
        return HashingEmbeddingProvider()
    return EndpointEmbeddingProvider(EndpointConfig.from_file(spec))
