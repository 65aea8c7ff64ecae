"""Chat-completions client with caching, retries, and a concurrency bound.

Speaks the OpenAI-compatible ``POST /v1/chat/completions`` wire protocol and
persists one JSON file per request hash so interrupted runs resume without
re-querying the endpoint. Cache writes go through a temp-file + atomic
rename, so a partially written entry is never observable.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Optional

import requests

from .prompts import PromptBundle

DEFAULT_TEMPERATURE = 0.0
DEFAULT_TOP_P = 1.0
DEFAULT_MAX_TOKENS = 16384

CHAT_COMPLETIONS_PATH = "/v1/chat/completions"

_TRANSIENT_STATUSES = frozenset({429}) | frozenset(range(500, 600))
_CONTEXT_OVERFLOW_HINTS = ("context_length", "maximum context length", "prompt is too long")


class ClientError(Exception):
    """Base class for completion-endpoint failures."""


class EndpointUnreachable(ClientError):
    """All retries exhausted, or a non-retriable endpoint failure."""


class AuthFailure(ClientError):
    """401/403 from the endpoint; never retried."""


class ContextOverflow(ClientError):
    """Endpoint-reported prompt-too-long; never retried."""


class TokenSource(Enum):
    API_USAGE = "api_usage"
    APPROXIMATE = "approximate"


@dataclass(frozen=True)
class SamplingParams:
    temperature: float = DEFAULT_TEMPERATURE
    top_p: float = DEFAULT_TOP_P
    max_tokens: int = DEFAULT_MAX_TOKENS
    seed: Optional[int] = None


@dataclass(frozen=True)
class CompletionRequest:
    """One chat completion to perform.

    ``as_system`` sends the prompt preamble as a system message with the
    problem as the user turn; the default sends the whole rendered prompt as
    a single user message. ``extra_body`` is merged verbatim into the request
    payload (vendor flags such as thinking-mode switches go here). Both are
    part of the cache key, as are the model id, the rendered prompt bytes,
    and every sampling field.
    """

    model_id: str
    prompt: PromptBundle
    sampling: SamplingParams = field(default_factory=SamplingParams)
    as_system: bool = False
    extra_body: Optional[Mapping] = None

    def cache_key(self) -> str:
        material = {
            "model_id": self.model_id,
            "rendered": self.prompt.rendered,
            "temperature": self.sampling.temperature,
            "top_p": self.sampling.top_p,
            "max_tokens": self.sampling.max_tokens,
            "seed": self.sampling.seed,
            "as_system": self.as_system,
            "extra_body": dict(self.extra_body) if self.extra_body else None,
        }
        blob = json.dumps(material, sort_keys=True, ensure_ascii=False).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()

    def messages(self) -> list:
        if self.as_system:
            return [
                {"role": "system", "content": self.prompt.instruction_text},
                {"role": "user", "content": self.prompt.problem_text},
            ]
        return [{"role": "user", "content": self.prompt.rendered}]


@dataclass(frozen=True)
class CompletionResult:
    text: str
    completion_tokens: int
    token_source: TokenSource
    latency_ms: int
    from_cache: bool = False

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "completion_tokens": self.completion_tokens,
            "token_source": self.token_source.value,
            "latency_ms": self.latency_ms,
        }

    @classmethod
    def from_dict(cls, data: dict, from_cache: bool = False) -> "CompletionResult":
        return cls(
            text=data["text"],
            completion_tokens=data["completion_tokens"],
            token_source=TokenSource(data["token_source"]),
            latency_ms=data["latency_ms"],
            from_cache=from_cache,
        )


def approximate_tokens(text: str) -> int:
    """Crude token estimate: whitespace-delimited words plus symbol chars.

    Symbol chars are the non-alphanumeric, non-whitespace characters. This is
    an APPROXIMATION used only when the endpoint omits usage data; results
    carry token_source=APPROXIMATE so the two paths are never conflated.
    """
    words = len(text.split())
    symbols = sum(1 for c in text if not c.isalnum() and not c.isspace())
    return words + symbols


def _sanitize_for_path(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", name) or "_"


class ChatClient:
    """Shared, thread-safe client enforcing at most ``concurrency`` in-flight requests.

    Cache layout: ``<cache_dir>/<model_id>/<hex-hash>.json`` (model ids are
    sanitized for the filesystem). Writes for the same key are single-flight:
    concurrent misses on one key perform one network call.
    """

    def __init__(
        self,
        base_url: str,
        cache_dir: str | Path,
        api_key: Optional[str] = None,
        concurrency: int = 4,
        max_attempts: int = 4,
        backoff_base_s: float = 0.5,
        timeout_s: float = 120.0,
    ):
        if concurrency < 1:
            raise ValueError("concurrency bound must be >= 1")
        if max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        self.url = base_url.rstrip("/") + CHAT_COMPLETIONS_PATH
        self.cache_dir = Path(cache_dir)
        self.api_key = api_key
        self.max_attempts = max_attempts
        self.backoff_base_s = backoff_base_s
        self.timeout_s = timeout_s
        self._inflight = threading.BoundedSemaphore(concurrency)
        self._key_locks: dict = {}
        self._key_locks_guard = threading.Lock()
        self._session = requests.Session()
        self._thread_local = threading.local()

    def _session_for_thread(self) -> requests.Session:
        # requests.Session is not thread-safe for concurrent use; one per worker.
        session = getattr(self._thread_local, "session", None)
        if session is None:
            session = requests.Session()
            self._thread_local.session = session
        return session

    def _cache_path(self, req: CompletionRequest) -> Path:
        return self.cache_dir / _sanitize_for_path(req.model_id) / f"{req.cache_key()}.json"

    def _read_cache(self, path: Path) -> Optional[CompletionResult]:
        try:
            with open(path, encoding="utf-8") as fh:
                return CompletionResult.from_dict(json.load(fh), from_cache=True)
        except FileNotFoundError:
            return None

    def _write_cache(self, path: Path, result: CompletionResult) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(f".{path.name}.{os.getpid()}.{threading.get_ident()}.tmp")
        tmp.write_text(
            json.dumps(result.to_dict(), ensure_ascii=False), encoding="utf-8"
        )
        os.replace(tmp, path)

    def _lock_for(self, key: str) -> threading.Lock:
        with self._key_locks_guard:
            lock = self._key_locks.get(key)
            if lock is None:
                lock = threading.Lock()
                self._key_locks[key] = lock
            return lock

    def complete(self, req: CompletionRequest) -> CompletionResult:
        """Return the completion for ``req``, from cache when available."""
        path = self._cache_path(req)
        cached = self._read_cache(path)
        if cached is not None:
            return cached
        with self._lock_for(req.cache_key()):
            cached = self._read_cache(path)
            if cached is not None:
                return cached
            result = self._complete_uncached(req)
            self._write_cache(path, result)
            return result

    def _complete_uncached(self, req: CompletionRequest) -> CompletionResult:
        payload = {
            "model": req.model_id,
            "messages": req.messages(),
            "temperature": req.sampling.temperature,
            "top_p": req.sampling.top_p,
            "max_tokens": req.sampling.max_tokens,
        }
        if req.sampling.seed is not None:
            payload["seed"] = req.sampling.seed
        if req.extra_body:
            payload.update(req.extra_body)

        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"

        started = time.monotonic()
        last_failure = "no attempt made"
        for attempt in range(self.max_attempts):
            if attempt:
                time.sleep(self.backoff_base_s * 2 ** (attempt - 1))
            try:
                with self._inflight:
                    response = self._session_for_thread().post(
                        self.url, json=payload, headers=headers, timeout=self.timeout_s
                    )
            except (requests.Timeout, requests.ConnectionError) as exc:
                last_failure = f"{type(exc).__name__}: {exc}"
                continue

            if response.status_code in (401, 403):
                raise AuthFailure(f"endpoint returned {response.status_code}")
            if response.status_code == 400 and _looks_like_context_overflow(response):
                raise ContextOverflow(_error_message(response))
            if response.status_code in _TRANSIENT_STATUSES:
                last_failure = f"HTTP {response.status_code}"
                continue
            if response.status_code != 200:
                raise EndpointUnreachable(
                    f"HTTP {response.status_code}: {_error_message(response)}"
                )

            return self._parse_success(response, started)

        raise EndpointUnreachable(
            f"gave up after {self.max_attempts} attempts ({last_failure})"
        )

    def _parse_success(self, response, started: float) -> CompletionResult:
        latency_ms = int((time.monotonic() - started) * 1000)
        try:
            body = response.json()
            text = body["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise EndpointUnreachable(f"malformed completion response: {exc}") from exc
        usage = body.get("usage") or {}
        tokens = usage.get("completion_tokens")
        if isinstance(tokens, int) and tokens >= 0:
            return CompletionResult(text, tokens, TokenSource.API_USAGE, latency_ms)
        return CompletionResult(
            text, approximate_tokens(text), TokenSource.APPROXIMATE, latency_ms
        )


def _error_message(response) -> str:
    try:
        error = response.json().get("error") or {}
        return str(error.get("message") or response.text[:200])
    except ValueError:
        return response.text[:200]


def _looks_like_context_overflow(response) -> bool:
    try:
        error = response.json().get("error") or {}
    except ValueError:
        return False
    probe = (str(error.get("code", "")) + " " + str(error.get("message", ""))).lower()
    return any(hint in probe for hint in _CONTEXT_OVERFLOW_HINTS)
