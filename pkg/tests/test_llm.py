from __future__ import annotations

import json
import random

import pytest

from soapbench import errors
from soapbench.llm import (
    BackendConfig,
    CompletionRequest,
    MockBackend,
    RemoteBackend,
    backoff_delay,
    complete,
    make_backend,
    request_digest,
)
from soapbench.prompts import Message
from soapbench.soap import parse_soap, report_violations

from conftest import ScriptedServer, ok_completion

MESSAGES = (
    Message("system", "Write the report."),
    Message("user", "GP: good morning P: my right ear hurts since 1,5 weeks"),
)


def _request(run_index: int = 0) -> CompletionRequest:
    return CompletionRequest(model="mock-gpt", messages=MESSAGES, run_index=run_index)


def _remote_config(url: str, **overrides) -> BackendConfig:
    values = dict(
        kind="remote",
        endpoint=url,
        credential="SOAPBENCH_TEST_KEY",
        timeout=5.0,
        max_attempts=4,
        base_backoff=0.01,
    )
    values.update(overrides)
    return BackendConfig(**values)


# -- request validation --------------------------------------------------------


def test_request_rejects_bad_temperature():
    with pytest.raises(ValueError):
        CompletionRequest(model="m", messages=MESSAGES, temperature=2.5)


def test_request_rejects_empty_messages():
    with pytest.raises(ValueError):
        CompletionRequest(model="m", messages=())


def test_digest_is_stable_and_content_sensitive():
    assert request_digest(MESSAGES) == request_digest(tuple(MESSAGES))
    changed = (MESSAGES[0], Message("user", "different transcript"))
    assert request_digest(MESSAGES) != request_digest(changed)


# -- mock backend ---------------------------------------------------------------


def test_mock_is_deterministic():
    first = MockBackend(seed=7).complete(_request())
    second = MockBackend(seed=7).complete(_request())
    assert first.text == second.text


def test_mock_varies_by_run_index():
    backend = MockBackend(seed=7)
    assert backend.complete(_request(0)).text != backend.complete(_request(1)).text


def test_mock_varies_by_seed():
    assert MockBackend(seed=1).complete(_request()).text != MockBackend(seed=2).complete(
        _request()
    ).text


def test_mock_output_parses_as_canonical_soap():
    response = MockBackend(seed=3).complete(_request())
    report = parse_soap(response.text)
    assert all(report.sections())
    assert report.extra.startswith("NB: draft ")
    assert report_violations(report) == []


def test_mock_samples_words_from_final_user_message():
    response = MockBackend(seed=3).complete(_request())
    source = set(MESSAGES[-1].content.split())
    report = parse_soap(response.text)
    for section in report.sections():
        assert set(section.split()) <= source


def test_mock_counts_calls():
    backend = MockBackend()
    for _ in range(3):
        backend.complete(_request())
    assert backend.calls == 3


def test_make_backend_dispatch():
    assert isinstance(make_backend(BackendConfig(kind="mock")), MockBackend)
    remote = make_backend(BackendConfig(kind="remote", endpoint="http://localhost:1"))
    assert isinstance(remote, RemoteBackend)


# -- remote backend --------------------------------------------------------------


def test_retry_on_rate_limit_then_success(monkeypatch):
    monkeypatch.setenv("SOAPBENCH_TEST_KEY", "sk-test")
    script = [(429, {"error": "slow down"}), (429, {"error": "slow down"}),
              ok_completion("S: fine\nO:\nA:\nP:")]
    with ScriptedServer(script) as server:
        response = complete(_remote_config(server.url), _request())
        assert response.text == "S: fine\nO:\nA:\nP:"
        assert server.request_count == 3
        assert response.prompt_tokens == 12
        assert response.completion_tokens == 34


def test_auth_error_is_immediate(monkeypatch):
    monkeypatch.setenv("SOAPBENCH_TEST_KEY", "sk-test")
    with ScriptedServer([(401, {"error": "bad key"})]) as server:
        with pytest.raises(errors.AuthError):
            complete(_remote_config(server.url), _request())
        assert server.request_count == 1


def test_rate_limit_exhausts_retries(monkeypatch):
    monkeypatch.setenv("SOAPBENCH_TEST_KEY", "sk-test")
    with ScriptedServer([(429, {"error": "slow down"})]) as server:
        with pytest.raises(errors.RateLimited):
            complete(_remote_config(server.url, max_attempts=3), _request())
        assert server.request_count == 3


def test_server_error_retried_then_success(monkeypatch):
    monkeypatch.setenv("SOAPBENCH_TEST_KEY", "sk-test")
    script = [(500, {"error": "boom"}), ok_completion("S: ok\nO:\nA:\nP:")]
    with ScriptedServer(script) as server:
        response = complete(_remote_config(server.url), _request())
        assert response.text == "S: ok\nO:\nA:\nP:"
        assert server.request_count == 2


def test_missing_credential(monkeypatch):
    monkeypatch.delenv("SOAPBENCH_TEST_KEY", raising=False)
    with pytest.raises(errors.MissingCredential) as excinfo:
        complete(_remote_config("http://127.0.0.1:9"), _request())
    assert "SOAPBENCH_TEST_KEY" in str(excinfo.value)


def test_malformed_response_body(monkeypatch):
    monkeypatch.setenv("SOAPBENCH_TEST_KEY", "sk-test")
    with ScriptedServer([(200, {"choices": []})]) as server:
        with pytest.raises(errors.MalformedResponse):
            complete(_remote_config(server.url), _request())


def test_credential_travels_in_header_not_body(monkeypatch):
    monkeypatch.setenv("SOAPBENCH_TEST_KEY", "sk-sekret")
    with ScriptedServer([ok_completion("S: x\nO:\nA:\nP:")]) as server:
        complete(_remote_config(server.url), _request())
        assert server.auth_headers == ["Bearer sk-sekret"]
        assert "sk-sekret" not in json.dumps(server.requests)


def test_request_body_shape(monkeypatch):
    monkeypatch.setenv("SOAPBENCH_TEST_KEY", "sk-test")
    with ScriptedServer([ok_completion("S: x\nO:\nA:\nP:")]) as server:
        request = CompletionRequest(
            model="gpt-4", messages=MESSAGES, temperature=0.0, max_output_tokens=256
        )
        complete(_remote_config(server.url), request)
        body = server.requests[0]
        assert body["model"] == "gpt-4"
        assert body["temperature"] == 0.0
        assert body["max_tokens"] == 256
        assert body["messages"][0] == {"role": "system", "content": "Write the report."}


def test_backoff_delays_are_non_decreasing():
    for seed in range(20):
        rng = random.Random(seed)
        delays = [backoff_delay(0.5, attempt, rng) for attempt in range(1, 7)]
        assert delays == sorted(delays)
        for attempt, delay in enumerate(delays, start=1):
            step = 0.5 * 2 ** (attempt - 1)
            assert step <= delay <= 2 * step
