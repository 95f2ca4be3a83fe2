"""Provider-agnostic text generation and embedding.

Two providers ship: a deterministic offline stub (the test substrate, and the
default) and one chat-completion style HTTP adapter. The gateway owns
timeouts, retries with backoff, unit-normalization of embeddings, and an
in-flight cap so slow providers never stall the event pipeline. API keys are
read from the environment at call time and never logged or persisted.
"""

from __future__ import annotations

import itertools
import logging
import math
import os
import re
import threading
import time
import zlib
from dataclasses import dataclass

from .config import ProviderSettings
from .errors import DimensionMismatch, GatewayTimeout, ProviderError, RateLimited, TetherError

logger = logging.getLogger(__name__)

STUB_DIM = 256
STUB_SENTENCE = "Take one small step to get back into it."

_TEMPLATE_LINE = re.compile(r"^template:\s*(\S+)", re.MULTILINE)
_DOC_TAG = re.compile(r"\[([^\[\]#]+)#\d+\]")


@dataclass
class GenerationRequest:
    rendered_prompt: str
    max_output_chars: int = 1200
    temperature: float = 0.7
    request_id: str = ""

    def validate(self) -> None:
        if not self.rendered_prompt:
            raise TetherError("rendered_prompt must be non-empty")
        if not (0.0 <= self.temperature <= 2.0):
            raise TetherError("temperature must be in [0, 2]")


@dataclass
class GenerationResult:
    text: str
    provider: str
    latency_ms: int
    truncated: bool


@dataclass
class RequestJournalEntry:
    request_id: str
    op: str
    attempts: int
    outcome: str
    latency_ms: int


def stub_embedding(text: str) -> list[float]:
    """Hashed bag of words: lowercase, split on whitespace, crc32 each token
    into one of 256 buckets, count, L2-normalize. Token-less input maps to
    the empty-string bucket so the unit-norm contract still holds."""
    counts = [0.0] * STUB_DIM
    tokens = text.lower().split() or [""]
    for tok in tokens:
        counts[zlib.crc32(tok.encode("utf-8")) % STUB_DIM] += 1.0
    norm = math.sqrt(sum(c * c for c in counts))
    return [c / norm for c in counts]


def stub_generation(prompt: str) -> str:
    """Pure function of the prompt: echoes the template id and the first
    retrieved doc tag so end-to-end tests can assert routing."""
    m = _TEMPLATE_LINE.search(prompt)
    template_id = m.group(1) if m else "unknown"
    d = _DOC_TAG.search(prompt)
    doc_id = d.group(1) if d else "none"
    return f"[{template_id}|{doc_id}] {STUB_SENTENCE}"


class StubProvider:
    name = "stub"

    def generate(self, prompt: str, temperature: float, max_chars: int) -> str:
        return stub_generation(prompt)

    def embed(self, texts: list[str]) -> list[list[float]]:
        return [stub_embedding(t) for t in texts]


class HttpProvider:
    """Chat-completion style JSON adapter; vendor mapping lives here only."""

    name = "http"

    def __init__(self, settings: ProviderSettings):
        self.settings = settings

    def _headers(self) -> dict:
        key = os.environ.get(self.settings.api_key_env, "")
        if not key:
            raise ProviderError(f"api key env {self.settings.api_key_env} is empty", status=None)
        return {"Authorization": f"Bearer {key}", "Content-Type": "application/json"}

    def generate(self, prompt: str, temperature: float, max_chars: int) -> str:
        import requests

        resp = requests.post(
            self.settings.endpoint.rstrip("/") + "/chat/completions",
            json={
                "model": self.settings.model_name,
                "messages": [{"role": "user", "content": prompt}],
                "temperature": temperature,
                "max_tokens": max(1, max_chars // 4),
            },
            headers=self._headers(),
            timeout=self.settings.timeout_ms / 1000.0,
        )
        self._raise_for_status(resp)
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError, ValueError) as e:
            raise ProviderError(f"malformed completion response: {e}", status=resp.status_code)

    def embed(self, texts: list[str]) -> list[list[float]]:
        import requests

        resp = requests.post(
            self.settings.endpoint.rstrip("/") + "/embeddings",
            json={"model": self.settings.embed_model_name, "input": texts},
            headers=self._headers(),
            timeout=self.settings.timeout_ms / 1000.0,
        )
        self._raise_for_status(resp)
        try:
            data = resp.json()["data"]
            return [row["embedding"] for row in data]
        except (KeyError, TypeError, ValueError) as e:
            raise ProviderError(f"malformed embedding response: {e}", status=resp.status_code)

    @staticmethod
    def _raise_for_status(resp) -> None:
        if resp.status_code == 429:
            raise RateLimited("provider rate limited", status=429)
        if resp.status_code >= 400:
            raise ProviderError(f"provider returned {resp.status_code}", status=resp.status_code)


def _retriable(error: Exception) -> bool:
    """Timeouts, rate limits and provider 5xx responses are transient."""
    if isinstance(error, (RateLimited, GatewayTimeout)):
        return True
    if isinstance(error, ProviderError) and error.status is not None:
        return error.status >= 500
    return False


class Gateway:
    def __init__(self, settings: ProviderSettings):
        self.settings = settings
        self.provider = StubProvider() if settings.kind == "stub" else HttpProvider(settings)
        self.journal: list[RequestJournalEntry] = []
        self._ids = itertools.count(1)
        self._journal_lock = threading.Lock()
        self._inflight = threading.BoundedSemaphore(max(1, settings.max_inflight))

    def next_request_id(self) -> str:
        return f"req-{next(self._ids)}"

    def generate(self, req: GenerationRequest) -> GenerationResult:
        req.validate()
        if not req.request_id:
            req.request_id = self.next_request_id()
        started = time.monotonic()
        text = self._call("generate", req.request_id,
                          lambda: self.provider.generate(req.rendered_prompt, req.temperature,
                                                         req.max_output_chars))
        latency_ms = int((time.monotonic() - started) * 1000)
        truncated = len(text) > req.max_output_chars
        if truncated:
            text = text[:req.max_output_chars]
        return GenerationResult(text=text, provider=self.provider.name,
                                latency_ms=latency_ms, truncated=truncated)

    def embed_batch(self, texts: list[str]) -> list[list[float]]:
        if not texts:
            raise TetherError("embed_batch needs at least one text")
        if len(texts) > self.settings.max_batch:
            raise TetherError(f"batch of {len(texts)} exceeds provider limit "
                              f"{self.settings.max_batch}")
        request_id = self.next_request_id()
        vectors = self._call("embed", request_id, lambda: self.provider.embed(texts))
        if len(vectors) != len(texts):
            raise DimensionMismatch(f"provider returned {len(vectors)} vectors for "
                                    f"{len(texts)} inputs")
        dim = len(vectors[0])
        out = []
        for vec in vectors:
            if len(vec) != dim:
                raise DimensionMismatch(f"inconsistent dims {len(vec)} vs {dim}")
            out.append(_normalize(vec))
        return out

    def _call(self, op: str, request_id: str, fn):
        """Run fn with retry/backoff. Total wall time stays within
        (max_retries + 1) * timeout_ms."""
        started = time.monotonic()
        deadline = started + (self.settings.max_retries + 1) * (self.settings.timeout_ms / 1000.0)
        attempts = 0
        last_error: Exception | None = None
        with self._inflight:
            while attempts <= self.settings.max_retries:
                attempts += 1
                try:
                    result = fn()
                    self._record(request_id, op, attempts, "ok",
                                 int((time.monotonic() - started) * 1000))
                    return result
                except Exception as e:
                    last_error = self._classify(e, request_id)
                    if not _retriable(last_error) or attempts > self.settings.max_retries:
                        break
                    backoff = min(0.05 * (2 ** (attempts - 1)), 1.0)
                    if time.monotonic() + backoff >= deadline:
                        break
                    time.sleep(backoff)
        self._record(request_id, op, attempts, type(last_error).__name__,
                     int((time.monotonic() - started) * 1000))
        assert last_error is not None
        raise last_error

    def _classify(self, e: Exception, request_id: str) -> Exception:
        if isinstance(e, TetherError):
            if isinstance(e, (GatewayTimeout, ProviderError)) and getattr(e, "request_id", None) is None:
                e.request_id = request_id
                e.details["request_id"] = request_id
            return e
        name = type(e).__name__
        # requests raises ConnectTimeout/ReadTimeout/ConnectionError; map all
        # transport-level failures to TIMEOUT so callers see one retriable code
        if "Timeout" in name or "Connection" in name:
            return GatewayTimeout(f"provider unreachable: {e}", request_id=request_id)
        return ProviderError(f"provider call failed: {e}", status=None, request_id=request_id)

    def _record(self, request_id: str, op: str, attempts: int, outcome: str,
                latency_ms: int) -> None:
        with self._journal_lock:
            self.journal.append(RequestJournalEntry(
                request_id=request_id, op=op, attempts=attempts,
                outcome=outcome, latency_ms=latency_ms))


def _normalize(vec: list[float]) -> list[float]:
    norm = math.sqrt(sum(v * v for v in vec))
    if norm == 0:
        raise DimensionMismatch("provider returned a zero vector")
    return [v / norm for v in vec]


def cosine(a: list[float], b: list[float]) -> float:
    return sum(x * y for x, y in zip(a, b))
