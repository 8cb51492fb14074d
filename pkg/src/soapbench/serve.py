"""Local annotation server: JSON API plus static annotator UI assets.

A research tool bound to loopback by default, no auth. Sessions are report
pairs taken from a run ledger (one variant) joined with the corpus
references. Annotation documents POSTed by the UI are validated and written
under ``<output>/annotations/<consultation>_run<k>.json``; concurrent writes
to one file are rejected with a conflict.

Endpoints (all JSON unless static):

* ``GET  /api/health``                         liveness probe
* ``GET  /api/sessions``                       available (consultation, run) pairs
* ``GET  /api/session?consultation=ID&run=N``  report pair + stored annotations
* ``GET  /api/taxonomy``                       tagging palette
* ``POST /api/tokenize``                       ``{text}`` -> token offsets
* ``POST /api/annotations``                    annotation document -> written file
* ``GET  /<path>``                             static assets (annotator UI build)
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .annotation import (
    AnnotationSet,
    ReportLookup,
    save_annotation_file,
    taxonomy,
    validate_annotations,
)
from .corpus import load_corpus
from .errors import SoapBenchError
from .experiment import load_aggregates, load_ledger
from .rouge import token_spans
from .soap import render_soap

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json",
    ".svg": "image/svg+xml",
    ".png": "image/png",
}


@dataclass
class ServeContext:
    sessions: dict[tuple[str, int], str]  # (consultation_id, run_index) -> generated text
    references: dict[str, str]  # consultation_id -> reference text
    variant_id: str
    annotations_dir: Path
    assets_dir: Path | None = None
    _locks: dict[Path, threading.Lock] = field(default_factory=dict)
    _locks_guard: threading.Lock = field(default_factory=threading.Lock)

    def lock_for(self, path: Path) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(path, threading.Lock())

    def report_lookup(self) -> ReportLookup:
        return ReportLookup(generated=self.sessions, reference=self.references)


def pick_variant(output_dir: Path, ledger_variants: list[str], requested: str | None) -> str:
    """Requested variant, or the best by ROUGE-1 mean, or the only one present."""
    if requested is not None:
        if requested not in ledger_variants:
            raise SoapBenchError(
                f"variant {requested!r} not in ledger (has: {', '.join(sorted(ledger_variants))})"
            )
        return requested
    aggregates_path = output_dir / "aggregates.json"
    if aggregates_path.exists():
        aggregates = [
            a for a in load_aggregates(aggregates_path) if a.variant_id in ledger_variants
        ]
        if aggregates:
            return max(aggregates, key=lambda a: a.rouge1_mean).variant_id
    if len(set(ledger_variants)) == 1:
        return ledger_variants[0]
    raise SoapBenchError(
        "multiple variants in ledger and no aggregates.json; pass --variant"
    )


def build_context(
    output_dir: Path | str,
    corpus_root: Path | str,
    variant: str | None = None,
    annotations_dir: Path | str | None = None,
    assets_dir: Path | str | None = None,
) -> ServeContext:
    output_dir = Path(output_dir)
    ledger = load_ledger(output_dir / "runs.jsonl")
    usable = [r for r in ledger.records if r.error is None]
    if not usable:
        raise SoapBenchError("ledger has no successful runs to annotate")
    variant_id = pick_variant(output_dir, [r.variant_id for r in usable], variant)
    sessions = {
        (r.consultation_id, r.run_index): r.response_text
        for r in usable
        if r.variant_id == variant_id
    }
    corpus = load_corpus(corpus_root)
    references = {ref.id: render_soap(ref.report) for ref in corpus.references}
    annotations_dir = (
        Path(annotations_dir) if annotations_dir else output_dir / "annotations"
    )
    return ServeContext(
        sessions=sessions,
        references=references,
        variant_id=variant_id,
        annotations_dir=annotations_dir,
        assets_dir=Path(assets_dir) if assets_dir else None,
    )


def annotation_path(context: ServeContext, consultation_id: str, run_index: int) -> Path:
    return context.annotations_dir / f"{consultation_id}_run{run_index}.json"


class _Handler(BaseHTTPRequestHandler):
    context: ServeContext  # set on the subclass by make_server

    # -- helpers ----------------------------------------------------------
    def _send_json(self, payload: dict, status: int = 200) -> None:
        body = json.dumps(payload, ensure_ascii=False, sort_keys=True).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _read_json(self) -> dict | None:
        length = int(self.headers.get("Content-Length") or 0)
        try:
            return json.loads(self.rfile.read(length).decode("utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError):
            self._send_json({"error": "request body is not valid JSON"}, 400)
            return None

    def log_message(self, format, *args):  # noqa: A002 - stdlib signature
        pass  # quiet; diagnostics go through the CLI, not per-request logs

    # -- routes -----------------------------------------------------------
    def do_GET(self):  # noqa: N802 - stdlib casing
        url = urlparse(self.path)
        if url.path == "/api/health":
            self._send_json({"ok": True, "variant_id": self.context.variant_id})
        elif url.path == "/api/sessions":
            sessions = [
                {
                    "consultation_id": cid,
                    "run_index": run_index,
                    "variant_id": self.context.variant_id,
                }
                for cid, run_index in sorted(self.context.sessions)
            ]
            self._send_json({"sessions": sessions})
        elif url.path == "/api/session":
            self._get_session(parse_qs(url.query))
        elif url.path == "/api/taxonomy":
            self._send_json(taxonomy())
        else:
            self._static(url.path)

    def do_POST(self):  # noqa: N802 - stdlib casing
        url = urlparse(self.path)
        if url.path == "/api/tokenize":
            data = self._read_json()
            if data is None:
                return
            text = data.get("text", "")
            tokens = [
                {"start": start, "end": end, "text": text[start:end].lower()}
                for start, end in token_spans(text)
            ]
            self._send_json({"tokens": tokens})
        elif url.path == "/api/annotations":
            data = self._read_json()
            if data is None:
                return
            self._post_annotations(data)
        else:
            self._send_json({"error": "not found"}, 404)

    def _get_session(self, query: dict) -> None:
        consultation_id = (query.get("consultation") or [None])[0]
        run_raw = (query.get("run") or ["0"])[0]
        try:
            run_index = int(run_raw)
        except ValueError:
            self._send_json({"error": f"bad run index {run_raw!r}"}, 400)
            return
        key = (consultation_id, run_index)
        if consultation_id is None or key not in self.context.sessions:
            self._send_json(
                {"error": f"unknown session {consultation_id}#{run_index}"}, 404
            )
            return
        path = annotation_path(self.context, consultation_id, run_index)
        stored = None
        if path.exists():
            stored = json.loads(path.read_text(encoding="utf-8"))
        self._send_json(
            {
                "consultation_id": consultation_id,
                "run_index": run_index,
                "variant_id": self.context.variant_id,
                "generated_text": self.context.sessions[key],
                "reference_text": self.context.references.get(consultation_id, ""),
                "annotations": stored,
            }
        )

    def _post_annotations(self, data: dict) -> None:
        try:
            annotation_set = AnnotationSet.from_dict(data)
        except (SoapBenchError, KeyError, TypeError) as exc:
            self._send_json({"ok": False, "error": f"bad document: {exc}"}, 400)
            return
        if annotation_set.consultation_id is None:
            self._send_json({"ok": False, "error": "consultation_id is required"}, 400)
            return
        run_index = data.get("run_index", 0)
        violations = validate_annotations(annotation_set, self.context.report_lookup())
        if violations:
            self._send_json({"ok": False, "violations": violations}, 422)
            return
        path = annotation_path(self.context, annotation_set.consultation_id, run_index)
        lock = self.context.lock_for(path)
        if not lock.acquire(blocking=False):
            self._send_json(
                {"ok": False, "error": f"{path.name} is being written by another session"},
                409,
            )
            return
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            save_annotation_file(annotation_set, path)
        finally:
            lock.release()
        self._send_json({"ok": True, "violations": [], "path": str(path)})

    def _static(self, path: str) -> None:
        assets = self.context.assets_dir
        if assets is None:
            self._send_json({"error": "no static assets configured"}, 404)
            return
        relative = path.lstrip("/") or "index.html"
        target = (assets / relative).resolve()
        if not str(target).startswith(str(assets.resolve())) or not target.is_file():
            self._send_json({"error": "not found"}, 404)
            return
        body = target.read_bytes()
        self.send_response(200)
        self.send_header(
            "Content-Type", _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
        )
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


def make_server(
    context: ServeContext, bind: str = "127.0.0.1", port: int = 0
) -> ThreadingHTTPServer:
    handler = type("BoundHandler", (_Handler,), {"context": context})
    return ThreadingHTTPServer((bind, port), handler)
