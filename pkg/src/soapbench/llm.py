"""Completion backends: an OpenAI-compatible remote endpoint and a seeded mock.

The remote backend POSTs ``{model, messages, temperature}`` to
``<endpoint>/chat/completions`` with bearer-token auth read from the
environment variable named in the config. Transient failures (429, 5xx,
timeouts, connection errors) are retried with exponential backoff plus
jitter; 401/403 fail immediately. The credential travels only in the
Authorization header, never in bodies, logs, or exceptions.

The mock backend needs no network: its output is a pure function of
(mock_seed, request digest, run_index), shaped as a parseable SOAP report
whose words are sampled from the request's final user message, so pipeline
tests get nonzero ROUGE overlap. Distinct run_index values yield distinct
texts, modeling run-to-run model variability.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import threading
import time
from dataclasses import dataclass
from typing import Sequence

import requests

from . import errors
from .prompts import Message

RETRYABLE_STATUS = frozenset({429} | set(range(500, 600)))


def request_digest(messages: Sequence[Message]) -> str:
    """Stable hash of rendered messages, used as cache key and ledger field."""
    payload = [{"role": m.role, "content": m.content} for m in messages]
    canonical = json.dumps(payload, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class CompletionRequest:
    model: str
    messages: tuple[Message, ...]
    temperature: float = 0.0
    max_output_tokens: int | None = None
    run_index: int = 0

    def __post_init__(self):
        if not self.messages:
            raise ValueError("messages must be non-empty")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")
        if self.max_output_tokens is not None and self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be positive")
        if self.run_index < 0:
            raise ValueError("run_index must be non-negative")

    def body(self) -> dict:
        body = {
            "model": self.model,
            "messages": [{"role": m.role, "content": m.content} for m in self.messages],
            "temperature": self.temperature,
        }
        if self.max_output_tokens is not None:
            body["max_tokens"] = self.max_output_tokens
        return body


@dataclass
class CompletionResponse:
    text: str
    prompt_tokens: int | None = None
    completion_tokens: int | None = None
    latency: float = 0.0


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "mock"  # "mock" | "remote"
    endpoint: str = ""
    credential: str = "OPENAI_API_KEY"
    timeout: float = 60.0
    max_attempts: int = 4
    base_backoff: float = 0.5
    mock_seed: int = 0

    def __post_init__(self):
        if self.kind not in ("mock", "remote"):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.kind == "remote" and not self.endpoint:
            raise ValueError("remote backend needs an endpoint")


def backoff_delay(base: float, attempt: int, rng: random.Random) -> float:
    """Delay before retry ``attempt`` (1-based): 2^(attempt-1)*base plus jitter.

    Jitter is bounded by the step itself, so consecutive delays never decrease.
    """
    step = base * (2 ** (attempt - 1))
    return step + rng.uniform(0.0, step)


class MockBackend:
    deterministic = True

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.calls = 0
        self._lock = threading.Lock()

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        with self._lock:
            self.calls += 1
        material = f"{self.seed}:{request_digest(request.messages)}:{request.run_index}"
        digest = hashlib.sha256(material.encode("utf-8")).digest()
        rng = random.Random(digest)
        source = request.messages[-1].content.split() or ["report"]
        sections = [
            " ".join(rng.choice(source) for _ in range(rng.randint(4, 12)))
            for _ in range(4)
        ]
        text = (
            f"S: {sections[0]}\n"
            f"O: {sections[1]}\n"
            f"A: {sections[2]}\n"
            f"P: {sections[3]}\n"
            f"NB: draft {digest[:4].hex()}"
        )
        return CompletionResponse(text=text, latency=0.0)


class RemoteBackend:
    deterministic = False

    def __init__(self, config: BackendConfig, session: requests.Session | None = None):
        self.config = config
        self.calls = 0
        self._session = session or requests.Session()
        self._rng = random.Random()

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        self.calls += 1
        api_key = os.environ.get(self.config.credential)
        if not api_key:
            raise errors.MissingCredential(
                f"environment variable {self.config.credential} is not set"
            )
        url = self.config.endpoint.rstrip("/") + "/chat/completions"
        headers = {"Authorization": f"Bearer {api_key}"}
        body = request.body()
        last_error: errors.BackendError = errors.BackendError("no attempts made")
        for attempt in range(1, self.config.max_attempts + 1):
            started = time.monotonic()
            try:
                response = self._session.post(
                    url, json=body, headers=headers, timeout=self.config.timeout
                )
            except requests.exceptions.Timeout:
                last_error = errors.Timeout(
                    f"request timed out after {self.config.timeout}s (attempt {attempt})"
                )
            except requests.exceptions.ConnectionError as exc:
                last_error = errors.BackendError(f"connection failed: {exc}")
            else:
                if response.status_code == 200:
                    return self._parse(response, time.monotonic() - started)
                if response.status_code in (401, 403):
                    raise errors.AuthError(f"authentication failed ({response.status_code})")
                if response.status_code == 429:
                    last_error = errors.RateLimited("rate limited (429)")
                elif response.status_code in RETRYABLE_STATUS:
                    last_error = errors.BackendError(
                        f"server error ({response.status_code})"
                    )
                else:
                    raise errors.BackendError(
                        f"unexpected status {response.status_code}"
                    )
            if attempt < self.config.max_attempts:
                time.sleep(backoff_delay(self.config.base_backoff, attempt, self._rng))
        raise last_error

    @staticmethod
    def _parse(response: requests.Response, latency: float) -> CompletionResponse:
        try:
            data = response.json()
            text = data["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise errors.MalformedResponse(f"cannot extract completion text: {exc}") from exc
        if not isinstance(text, str):
            raise errors.MalformedResponse("completion content is not a string")
        usage = data.get("usage") or {}
        return CompletionResponse(
            text=text,
            prompt_tokens=usage.get("prompt_tokens"),
            completion_tokens=usage.get("completion_tokens"),
            latency=latency,
        )


def make_backend(config: BackendConfig) -> MockBackend | RemoteBackend:
    if config.kind == "mock":
        return MockBackend(config.mock_seed)
    return RemoteBackend(config)


def complete(config: BackendConfig, request: CompletionRequest) -> CompletionResponse:
    """One-shot convenience wrapper; experiments hold a backend instead."""
    return make_backend(config).complete(request)
