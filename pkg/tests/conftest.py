"""Shared fixtures: repo paths, a scripted fake chat-completions server."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parents[1]
FIXTURES = REPO_ROOT / "fixtures"
CORPUS_DIR = FIXTURES / "corpus"
ANNOTATIONS_DIR = FIXTURES / "annotations"
PROMPT_PACK = FIXTURES / "prompt_pack.json"


@pytest.hookimpl(tryfirst=True, hookwrapper=True)
def pytest_runtest_makereport(item, call):
    # Expose per-phase outcomes so the acceptance module can print its
    # one pass/fail line per criterion.
    outcome = yield
    report = outcome.get_result()
    setattr(item, "rep_" + report.when, report)


@pytest.fixture
def fixture_paths():
    return {
        "root": REPO_ROOT,
        "fixtures": FIXTURES,
        "corpus": CORPUS_DIR,
        "annotations": ANNOTATIONS_DIR,
        "pack": PROMPT_PACK,
    }


class ScriptedServer:
    """HTTP server that replays a scripted list of (status, body) responses.

    Records every request body and auth header so tests can assert on what
    the client actually sent. Repeats the last scripted step once the script
    is exhausted.
    """

    def __init__(self, script):
        self.script = list(script)
        self.requests: list[dict] = []
        self.auth_headers: list[str | None] = []
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length") or 0)
                raw = self.rfile.read(length)
                try:
                    outer.requests.append(json.loads(raw))
                except json.JSONDecodeError:
                    outer.requests.append({"raw": raw.decode("utf-8", "replace")})
                outer.auth_headers.append(self.headers.get("Authorization"))
                index = min(len(outer.requests) - 1, len(outer.script) - 1)
                status, body = outer.script[index]
                payload = json.dumps(body).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, *args):
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    @property
    def request_count(self) -> int:
        return len(self.requests)

    def __enter__(self):
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self._server.shutdown()
        self._server.server_close()


def ok_completion(text: str) -> tuple[int, dict]:
    return (
        200,
        {
            "choices": [{"message": {"role": "assistant", "content": text}}],
            "usage": {"prompt_tokens": 12, "completion_tokens": 34},
        },
    )


@pytest.fixture
def scripted_server():
    return ScriptedServer
