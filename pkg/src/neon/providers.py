"""Model provider interfaces: text completion and text embedding.

Real traffic goes through :class:`HttpLlmClient` (OpenAI-style chat endpoint).
Offline runs use the deterministic stand-ins here and in :mod:`neon.mock`.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from pathlib import Path
from typing import Callable, Protocol, runtime_checkable

import httpx
import numpy as np

from .errors import AuthError, MalformedResponse, ProviderFailure, RateLimited, Timeout

log = logging.getLogger(__name__)

DEFAULT_API_KEY_ENV = "NEON_LLM_API_KEY"
MOCK_DIMENSION = 64


@runtime_checkable
class LlmClient(Protocol):
    def complete(self, prompt: str, *, temperature: float = 0.0, max_tokens: int = 1024) -> str: ...


@runtime_checkable
class Embedder(Protocol):
    def embed(self, text: str) -> np.ndarray: ...

    def dimension(self) -> int: ...


def model_info(llm: object) -> str:
    return getattr(llm, "model_info", None) or type(llm).__name__


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


_TOKEN = re.compile(r"\w+")


class HashingEmbedder:
    """Hashed bag of words, L2-normalised; empty text maps to the zero vector.

    Buckets come from BLAKE2b rather than ``hash()`` so vectors are identical
    across processes and platforms.
    """

    def __init__(self, dim: int = MOCK_DIMENSION):
        if dim < 1:
            raise ValueError("dimension must be positive")
        self.dim = dim
        self.model_info = f"hashing-bow-{dim}"

    def dimension(self) -> int:
        return self.dim

    def bucket(self, token: str) -> int:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little") % self.dim

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        for tok in _TOKEN.findall(text.lower()):
            vec[self.bucket(tok)] += 1.0
        norm = np.sqrt(np.dot(vec, vec))
        if norm > 0:
            vec /= norm
        return vec


def mock_embed(text: str) -> np.ndarray:
    return _DEFAULT_EMBEDDER.embed(text)


_DEFAULT_EMBEDDER = HashingEmbedder()


class TokenBucket:
    """Thread-safe token bucket; ``acquire`` blocks until a token is free."""

    def __init__(self, rate: float, capacity: float | None = None,
                 clock: Callable[[], float] = time.monotonic, sleep: Callable[[float], None] = time.sleep):
        if rate <= 0:
            raise ValueError("rate must be positive")
        self.rate = rate
        self.capacity = capacity if capacity is not None else max(1.0, rate)
        self._tokens = self.capacity
        self._clock = clock
        self._sleep = sleep
        self._last = clock()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self._clock()
                self._tokens = min(self.capacity, self._tokens + (now - self._last) * self.rate)
                self._last = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self.rate
            self._sleep(wait)


class HttpLlmClient:
    """Chat-completions client with retries on timeouts, 429 and 5xx.

    The credential is read from ``api_key`` or the environment variable named
    by ``api_key_env``; it is checked before any request is made.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        *,
        api_key: str | None = None,
        api_key_env: str = DEFAULT_API_KEY_ENV,
        attempts: int = 3,
        backoff: float = 1.0,
        timeout: float = 60.0,
        rate_limit: float | None = None,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if attempts < 1:
            raise ValueError("attempts must be >= 1")
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.model_info = model
        self.api_key = api_key if api_key is not None else os.environ.get(api_key_env)
        self.api_key_env = api_key_env
        self.attempts = attempts
        self.backoff = backoff
        self.sleep = sleep
        self.bucket = TokenBucket(rate_limit) if rate_limit else None
        self._client = httpx.Client(timeout=timeout, transport=transport)
        self._local = threading.local()

    @property
    def last_retry_count(self) -> int:
        """Retries spent by the most recent call on this thread."""
        return getattr(self._local, "retries", 0)

    def complete(self, prompt: str, *, temperature: float = 0.0, max_tokens: int = 1024) -> str:
        if not self.api_key:
            raise AuthError(f"no credential: set {self.api_key_env}")
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
            "max_tokens": max_tokens,
        }
        self._local.retries = 0
        for attempt in range(self.attempts):
            try:
                return self._post(body)
            except (Timeout, RateLimited) as exc:
                if attempt + 1 == self.attempts:
                    raise
                delay = self.backoff * (2 ** attempt)
                log.warning("llm call failed (%s); retry %d in %.1fs", exc, attempt + 1, delay)
                self._local.retries = attempt + 1
                self.sleep(delay)
        raise AssertionError("unreachable")

    def _post(self, body: dict) -> str:
        if self.bucket is not None:
            self.bucket.acquire()
        try:
            resp = self._client.post(
                f"{self.endpoint}/chat/completions",
                json=body,
                headers={"Authorization": f"Bearer {self.api_key}"},
            )
        except httpx.TimeoutException as exc:
            raise Timeout(str(exc) or "request timed out") from exc
        except httpx.HTTPError as exc:
            raise ProviderFailure(f"transport error: {exc}") from exc
        if resp.status_code in (401, 403):
            raise AuthError(f"HTTP {resp.status_code}")
        if resp.status_code == 429:
            raise RateLimited("HTTP 429")
        if resp.status_code >= 500:
            raise Timeout(f"HTTP {resp.status_code}")  # transient; retried like a timeout
        if resp.status_code >= 400:
            raise ProviderFailure(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            content = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise MalformedResponse(f"unexpected response body: {resp.text[:200]}") from exc
        if not isinstance(content, str):
            raise MalformedResponse("completion content is not a string")
        return content


class HttpEmbedder:
    """Embeddings from an OpenAI-style ``/embeddings`` endpoint."""

    def __init__(self, endpoint: str, model: str, dim: int, *, api_key: str | None = None,
                 api_key_env: str = DEFAULT_API_KEY_ENV, timeout: float = 60.0,
                 transport: httpx.BaseTransport | None = None):
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.dim = dim
        self.model_info = model
        self.api_key = api_key if api_key is not None else os.environ.get(api_key_env)
        self.api_key_env = api_key_env
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def dimension(self) -> int:
        return self.dim

    def embed(self, text: str) -> np.ndarray:
        if not self.api_key:
            raise AuthError(f"no credential: set {self.api_key_env}")
        try:
            resp = self._client.post(
                f"{self.endpoint}/embeddings",
                json={"model": self.model, "input": text},
                headers={"Authorization": f"Bearer {self.api_key}"},
            )
        except httpx.TimeoutException as exc:
            raise Timeout(str(exc) or "request timed out") from exc
        if resp.status_code >= 400:
            raise ProviderFailure(f"HTTP {resp.status_code}")
        try:
            vec = np.asarray(resp.json()["data"][0]["embedding"], dtype=np.float64)
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise MalformedResponse("unexpected embeddings body") from exc
        if vec.shape != (self.dim,):
            raise MalformedResponse(f"embedding has {vec.size} dims, expected {self.dim}")
        return vec


class RetryingLlm:
    """Wrap any client so each call gets ``attempts`` tries with exponential backoff."""

    def __init__(self, inner: LlmClient, attempts: int = 3, backoff: float = 1.0,
                 sleep: Callable[[float], None] = time.sleep):
        self.inner = inner
        self.attempts = attempts
        self.backoff = backoff
        self.sleep = sleep
        self.model_info = model_info(inner)

    def complete(self, prompt: str, **params) -> str:
        for attempt in range(self.attempts):
            try:
                return self.inner.complete(prompt, **params)
            except AuthError:
                raise
            except Exception as exc:
                if attempt + 1 == self.attempts:
                    if isinstance(exc, ProviderFailure):
                        raise
                    raise ProviderFailure(str(exc)) from exc
                self.sleep(self.backoff * (2 ** attempt))
        raise AssertionError("unreachable")


class ReplayLlm:
    """Serve completions from a cassette (JSON lines of ``{prompt_hash, response}``)."""

    def __init__(self, cassette: str | Path | dict[str, str]):
        if isinstance(cassette, dict):
            self.responses = dict(cassette)
        else:
            self.responses = {}
            with open(cassette, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        rec = json.loads(line)
                        self.responses[rec["prompt_hash"]] = rec["response"]
        self.model_info = "replay"

    def complete(self, prompt: str, **params) -> str:
        try:
            return self.responses[prompt_hash(prompt)]
        except KeyError:
            raise ProviderFailure(f"no recorded response for prompt {prompt_hash(prompt)[:12]}") from None


class RecordingLlm:
    """Pass calls through to ``inner`` and append each exchange to a cassette."""

    def __init__(self, inner: LlmClient, cassette: str | Path):
        self.inner = inner
        self.path = Path(cassette)
        self.model_info = model_info(inner)
        self._lock = threading.Lock()

    def complete(self, prompt: str, **params) -> str:
        response = self.inner.complete(prompt, **params)
        line = json.dumps({"prompt_hash": prompt_hash(prompt), "response": response}, ensure_ascii=False)
        with self._lock, open(self.path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
        return response
