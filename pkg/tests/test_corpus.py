from __future__ import annotations

import pytest

from soapbench.corpus import (
    Corpus,
    ReferenceReport,
    ShotExample,
    Transcript,
    corpus_stats,
    load_corpus,
    save_corpus,
    shuffle_split,
    validate_corpus,
)
from soapbench.errors import CorpusError, EmptyCorpus, MissingReference, ParseFailure
from soapbench.soap import SoapReport

from conftest import CORPUS_DIR

REPORT = "S: ear pain two weeks\nO: eardrum visible\nA: OMA right\nP: antibiotics one week\n"


def _write_pair(root, consultation_id: str, words: int = 10):
    (root / "transcripts").mkdir(exist_ok=True, parents=True)
    (root / "references").mkdir(exist_ok=True, parents=True)
    text = " ".join(f"word{i}" for i in range(words)) + "\n"
    (root / "transcripts" / f"{consultation_id}.txt").write_text(text)
    (root / "references" / f"{consultation_id}.soap.txt").write_text(REPORT)


def test_load_shipped_fixture_corpus():
    corpus = load_corpus(CORPUS_DIR)
    assert len(corpus.transcripts) == 5
    assert len(corpus.references) == 5
    assert len(corpus.shots) == 2
    assert validate_corpus(corpus) == []


def test_load_missing_reference(tmp_path):
    _write_pair(tmp_path, "2006")
    (tmp_path / "transcripts" / "2007.txt").write_text("hello there\n")
    with pytest.raises(MissingReference) as excinfo:
        load_corpus(tmp_path)
    assert excinfo.value.consultation_id == "2007"


def test_load_empty_directory(tmp_path):
    with pytest.raises(EmptyCorpus):
        load_corpus(tmp_path)


def test_load_malformed_soap_file(tmp_path):
    _write_pair(tmp_path, "2006")
    (tmp_path / "references" / "2006.soap.txt").write_text("no markers at all\n")
    with pytest.raises(ParseFailure) as excinfo:
        load_corpus(tmp_path)
    assert "2006.soap.txt" in str(excinfo.value)


def test_load_rejects_orphan_reference(tmp_path):
    _write_pair(tmp_path, "2006")
    (tmp_path / "references" / "2099.soap.txt").write_text(REPORT)
    with pytest.raises(CorpusError, match="orphan reference: 2099"):
        load_corpus(tmp_path)


def _corpus_with_counts(counts):
    transcripts = []
    references = []
    for index, count in enumerate(counts):
        cid = f"c{index}"
        transcripts.append(Transcript.from_text(cid, " ".join(["w"] * count)))
        references.append(ReferenceReport.from_report(cid, SoapReport(subjective="x y z")))
    return Corpus(tuple(transcripts), tuple(references), ())


def test_stats_on_constructed_counts():
    stats = corpus_stats(_corpus_with_counts([606, 1000, 1200, 1370, 1869]))
    assert stats.transcript_mean == 1209  # 6045 / 5
    assert stats.transcript_min == 606
    assert stats.transcript_max == 1869


def test_stats_single_transcript_sd_zero():
    stats = corpus_stats(_corpus_with_counts([100]))
    assert stats.transcript_mean == 100
    assert stats.transcript_sd == 0.0
    assert stats.transcript_min == stats.transcript_max == 100


def test_stats_on_shipped_fixture_match_documented_targets():
    stats = corpus_stats(load_corpus(CORPUS_DIR))
    assert stats.transcript_mean == 1209
    assert (stats.transcript_min, stats.transcript_max) == (606, 1869)
    assert stats.reference_mean == 60
    assert (stats.reference_min, stats.reference_max) == (37, 87)


def test_stats_agree_with_streaming_fold():
    corpus = load_corpus(CORPUS_DIR)
    stats = corpus_stats(corpus)
    # Welford's online algorithm as the independent recomputation.
    count, mean_acc, m2 = 0, 0.0, 0.0
    for transcript in corpus.transcripts:
        count += 1
        delta = transcript.word_count - mean_acc
        mean_acc += delta / count
        m2 += delta * (transcript.word_count - mean_acc)
    assert stats.transcript_mean == pytest.approx(mean_acc, rel=1e-12)
    assert stats.transcript_sd**2 == pytest.approx(m2 / (count - 1), rel=1e-12)


def test_validate_reports_shot_input_overlap():
    corpus = load_corpus(CORPUS_DIR)
    tainted = Corpus(
        corpus.transcripts,
        corpus.references,
        corpus.shots + (ShotExample("2006", corpus.shots[0].report),),
    )
    assert "shot/input overlap: 2006" in validate_corpus(tainted)


def test_validate_reports_orphan_reference():
    corpus = load_corpus(CORPUS_DIR)
    tainted = Corpus(
        corpus.transcripts,
        corpus.references + (ReferenceReport.from_report("2099", SoapReport(subjective="x")),),
        corpus.shots,
    )
    assert "orphan reference: 2099" in validate_corpus(tainted)


def test_word_counts_stable_under_reserialization(tmp_path):
    corpus = load_corpus(CORPUS_DIR)
    save_corpus(corpus, tmp_path)
    reloaded = load_corpus(tmp_path)
    assert [t.word_count for t in reloaded.transcripts] == [
        t.word_count for t in corpus.transcripts
    ]
    assert [r.word_count for r in reloaded.references] == [
        r.word_count for r in corpus.references
    ]


def test_shuffle_split_is_deterministic():
    corpus = load_corpus(CORPUS_DIR)
    first = shuffle_split(corpus, seed=42)
    second = shuffle_split(corpus, seed=42)
    assert [s.id for s in first.shots] == [s.id for s in second.shots]
    assert len(first.shots) == 2
    assert len(first.transcripts) == 5
    assert validate_corpus(first) == []
    different = shuffle_split(corpus, seed=43)
    # 7 consultations give 21 possible splits; these seeds happen to differ.
    assert {s.id for s in different.shots} != {s.id for s in first.shots}


def test_shuffle_split_needs_shot_transcripts():
    corpus = load_corpus(CORPUS_DIR)
    stripped = Corpus(
        corpus.transcripts,
        corpus.references,
        tuple(ShotExample(s.id, s.report, None) for s in corpus.shots),
    )
    with pytest.raises(CorpusError, match="has no transcript"):
        shuffle_split(stripped, seed=1)
