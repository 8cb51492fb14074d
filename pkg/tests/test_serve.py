from __future__ import annotations

import json
import threading

import pytest
import requests

from soapbench.annotation import load_annotation_file, tally_errors
from soapbench.cli import main
from soapbench.errors import SoapBenchError
from soapbench.serve import annotation_path, build_context, make_server

from conftest import CORPUS_DIR, PROMPT_PACK


@pytest.fixture(scope="module")
def output_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("serve") / "out"
    code = main([
        "run",
        "--corpus", str(CORPUS_DIR),
        "--pack", str(PROMPT_PACK),
        "--output", str(out),
        "--variants", "two-shot+a+b+c+d,two-shot",
        "--repeats", "2",
        "--mock-seed", "7",
    ])
    assert code == 0
    return out


@pytest.fixture()
def server(output_dir, tmp_path):
    context = build_context(
        output_dir=output_dir,
        corpus_root=CORPUS_DIR,
        annotations_dir=tmp_path / "annotations",
    )
    httpd = make_server(context, port=0)
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    host, port = httpd.server_address[:2]
    try:
        yield f"http://{host}:{port}", context
    finally:
        httpd.shutdown()
        httpd.server_close()


def test_variant_defaults_to_best_by_rouge1(output_dir):
    context = build_context(output_dir=output_dir, corpus_root=CORPUS_DIR)
    from soapbench.experiment import aggregate, load_ledger

    aggregates = aggregate(load_ledger(output_dir / "runs.jsonl"))
    best = max(aggregates, key=lambda a: a.rouge1_mean)
    assert context.variant_id == best.variant_id


def test_unknown_variant_rejected(output_dir):
    with pytest.raises(SoapBenchError, match="not in ledger"):
        build_context(output_dir=output_dir, corpus_root=CORPUS_DIR, variant="nope")


def test_sessions_listing(server):
    url, context = server
    data = requests.get(f"{url}/api/sessions", timeout=5).json()
    assert len(data["sessions"]) == 10  # 5 consultations x 2 runs
    first = data["sessions"][0]
    assert first == {
        "consultation_id": "2006", "run_index": 0, "variant_id": context.variant_id,
    }


def test_session_payload(server):
    url, context = server
    response = requests.get(f"{url}/api/session?consultation=2006&run=0", timeout=5)
    assert response.status_code == 200
    data = response.json()
    assert data["generated_text"] == context.sessions[("2006", 0)]
    assert data["reference_text"].startswith("S: ")
    assert data["annotations"] is None


def test_unknown_session_is_404(server):
    url, _ = server
    response = requests.get(f"{url}/api/session?consultation=9999&run=0", timeout=5)
    assert response.status_code == 404
    assert "unknown session" in response.json()["error"]


def test_taxonomy_endpoint(server):
    url, _ = server
    data = requests.get(f"{url}/api/taxonomy", timeout=5).json()
    assert {entry["category"] for entry in data["error_types"]} == {
        "hallucination", "incorrect_statement", "repetition",
        "classification_error", "omission", "redundant",
    }
    assert data["word_categories"] == ["identical", "paraphrased", "additional"]


def test_tokenize_endpoint(server):
    url, _ = server
    response = requests.post(
        f"{url}/api/tokenize", json={"text": "Ear pain, 1,5 wk."}, timeout=5
    )
    tokens = response.json()["tokens"]
    assert [t["text"] for t in tokens] == ["ear", "pain", "1", "5", "wk"]
    assert tokens[0] == {"start": 0, "end": 3, "text": "ear"}


def _valid_document(context) -> dict:
    text = context.sessions[("2006", 0)]
    return {
        "schema_version": 1,
        "consultation_id": "2006",
        "run_index": 0,
        "annotations": [
            {
                "consultation_id": "2006",
                "error_type": {"category": "hallucination"},
                "dedup_key": "h1",
                "run_index": 0,
                "span": [0, min(10, len(text))],
                "note": "",
            }
        ],
        "word_tags": [
            {"consultation_id": "2006", "run_index": 0, "span": [0, 4], "category": "identical"}
        ],
        "votes": [{"category": "duration of complaints", "rater_id": "gp1", "vote": "relevant"}],
    }


def test_post_annotations_writes_validated_file(server):
    url, context = server
    document = _valid_document(context)
    response = requests.post(f"{url}/api/annotations", json=document, timeout=5)
    assert response.status_code == 200
    body = response.json()
    assert body["ok"] is True and body["violations"] == []
    stored = load_annotation_file(body["path"])
    assert tally_errors(stored.annotations).total == 1
    # Saving the same document again yields identical bytes (idempotent save).
    first_bytes = open(body["path"], "rb").read()
    response = requests.post(f"{url}/api/annotations", json=document, timeout=5)
    assert response.status_code == 200
    assert open(body["path"], "rb").read() == first_bytes


def test_post_rejects_out_of_bounds_span(server):
    url, context = server
    document = _valid_document(context)
    document["annotations"][0]["span"] = [0, 10_000]
    response = requests.post(f"{url}/api/annotations", json=document, timeout=5)
    assert response.status_code == 422
    assert response.json()["violations"] == ["span out of bounds: 2006#0"]


def test_post_conflict_when_file_locked(server):
    url, context = server
    document = _valid_document(context)
    path = annotation_path(context, "2006", 0)
    lock = context.lock_for(path)
    assert lock.acquire(blocking=False)
    try:
        response = requests.post(f"{url}/api/annotations", json=document, timeout=5)
        assert response.status_code == 409
    finally:
        lock.release()


def test_static_assets_served_with_traversal_guard(output_dir, tmp_path):
    assets = tmp_path / "assets"
    assets.mkdir()
    (assets / "index.html").write_text("<html>annotator</html>")
    secret = tmp_path / "secret.txt"
    secret.write_text("do not serve")
    context = build_context(
        output_dir=output_dir, corpus_root=CORPUS_DIR,
        annotations_dir=tmp_path / "ann", assets_dir=assets,
    )
    httpd = make_server(context, port=0)
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    host, port = httpd.server_address[:2]
    try:
        index = requests.get(f"http://{host}:{port}/", timeout=5)
        assert index.status_code == 200
        assert "annotator" in index.text
        traversal = requests.get(f"http://{host}:{port}/../secret.txt", timeout=5)
        assert traversal.status_code == 404
    finally:
        httpd.shutdown()
        httpd.server_close()


def test_health_endpoint(server):
    url, context = server
    data = requests.get(f"{url}/api/health", timeout=5).json()
    assert data == {"ok": True, "variant_id": context.variant_id}
