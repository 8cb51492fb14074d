"""Load and validate the consultation corpus.

Directory layout::

    <root>/transcripts/<id>.txt       plain UTF-8 dialogue
    <root>/references/<id>.soap.txt   SOAP report paired with the transcript
    <root>/shots/<id>.soap.txt        shot example report
    <root>/shots/<id>.txt             optional paired transcript for shots

Word counts are whitespace-separated token counts; a reference's word count is
the sum of its four section counts (markers and extra excluded). Corpus values
are immutable and safe to share across concurrent workers.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path

from .errors import CorpusError, EmptyCorpus, MissingReference, NoSectionsFound, ParseFailure
from .soap import SectionWordCounts, SoapReport, parse_soap, render_soap, report_violations
from .stats import mean, sample_sd

SOAP_SUFFIX = ".soap.txt"


@dataclass(frozen=True)
class Transcript:
    id: str
    text: str
    word_count: int

    @classmethod
    def from_text(cls, transcript_id: str, text: str) -> "Transcript":
        return cls(transcript_id, text, len(text.split()))


@dataclass(frozen=True)
class ReferenceReport:
    id: str
    report: SoapReport
    word_count: int

    @classmethod
    def from_report(cls, consultation_id: str, report: SoapReport) -> "ReferenceReport":
        return cls(consultation_id, report, SectionWordCounts.from_report(report).total)


@dataclass(frozen=True)
class ShotExample:
    id: str
    report: SoapReport
    transcript: str | None = None


@dataclass(frozen=True)
class Corpus:
    transcripts: tuple[Transcript, ...]
    references: tuple[ReferenceReport, ...]
    shots: tuple[ShotExample, ...]

    def reference_for(self, consultation_id: str) -> ReferenceReport:
        for reference in self.references:
            if reference.id == consultation_id:
                return reference
        raise MissingReference(consultation_id)


@dataclass(frozen=True)
class CorpusStats:
    transcript_mean: float
    transcript_sd: float
    transcript_min: int
    transcript_max: int
    reference_mean: float
    reference_sd: float
    reference_min: int
    reference_max: int


def _read_text(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ParseFailure(path, 1, f"not valid UTF-8: {exc}") from exc


def _read_report(path: Path) -> SoapReport:
    text = _read_text(path)
    try:
        return parse_soap(text)
    except NoSectionsFound as exc:
        raise ParseFailure(path, 1, str(exc)) from exc


def load_corpus(root: Path | str) -> Corpus:
    """Load and validate the corpus under ``root``; ids come from file stems."""
    root = Path(root)
    transcript_paths = sorted((root / "transcripts").glob("*.txt"))
    transcripts = tuple(
        Transcript.from_text(path.stem, _read_text(path)) for path in transcript_paths
    )
    if not transcripts:
        raise EmptyCorpus(f"no transcripts found under {root}")

    references = []
    for transcript in transcripts:
        path = root / "references" / f"{transcript.id}{SOAP_SUFFIX}"
        if not path.exists():
            raise MissingReference(transcript.id)
        references.append(ReferenceReport.from_report(transcript.id, _read_report(path)))
    # Orphan references (no paired transcript) surface through validation below.
    known = {t.id for t in transcripts}
    for path in sorted((root / "references").glob(f"*{SOAP_SUFFIX}")):
        ref_id = path.name[: -len(SOAP_SUFFIX)]
        if ref_id not in known:
            references.append(ReferenceReport.from_report(ref_id, _read_report(path)))

    shots = []
    for path in sorted((root / "shots").glob(f"*{SOAP_SUFFIX}")):
        shot_id = path.name[: -len(SOAP_SUFFIX)]
        transcript_path = root / "shots" / f"{shot_id}.txt"
        shot_transcript = _read_text(transcript_path) if transcript_path.exists() else None
        shots.append(ShotExample(shot_id, _read_report(path), shot_transcript))

    corpus = Corpus(tuple(transcripts), tuple(references), tuple(shots))
    violations = validate_corpus(corpus)
    if violations:
        raise CorpusError("; ".join(violations))
    return corpus


def validate_corpus(corpus: Corpus) -> list[str]:
    """Report every invariant violation; an empty list means valid. Never throws."""
    violations = []
    transcript_ids = [t.id for t in corpus.transcripts]
    reference_ids = [r.id for r in corpus.references]
    shot_ids = [s.id for s in corpus.shots]
    for label, ids in (
        ("transcript", transcript_ids),
        ("reference", reference_ids),
        ("shot", shot_ids),
    ):
        for duplicate in sorted({i for i in ids if ids.count(i) > 1}):
            violations.append(f"duplicate {label} id: {duplicate}")
    for transcript in corpus.transcripts:
        if not transcript.text:
            violations.append(f"empty transcript: {transcript.id}")
        if transcript.word_count != len(transcript.text.split()):
            violations.append(f"word count mismatch: {transcript.id}")
        if transcript.id not in reference_ids:
            violations.append(f"missing reference: {transcript.id}")
    for reference in corpus.references:
        if reference.id not in transcript_ids:
            violations.append(f"orphan reference: {reference.id}")
        for problem in report_violations(reference.report):
            violations.append(f"invalid reference {reference.id}: {problem}")
        if reference.word_count != SectionWordCounts.from_report(reference.report).total:
            violations.append(f"word count mismatch: {reference.id}")
    for shot in corpus.shots:
        if shot.id in transcript_ids:
            violations.append(f"shot/input overlap: {shot.id}")
        for problem in report_violations(shot.report):
            violations.append(f"invalid shot {shot.id}: {problem}")
    return violations


def corpus_stats(corpus: Corpus) -> CorpusStats:
    """Word-count statistics over transcripts and references (sample SD)."""
    transcript_counts = [t.word_count for t in corpus.transcripts]
    reference_counts = [r.word_count for r in corpus.references]
    if not transcript_counts or not reference_counts:
        raise EmptyCorpus("corpus statistics need at least one transcript and reference")
    return CorpusStats(
        transcript_mean=mean(transcript_counts),
        transcript_sd=sample_sd(transcript_counts),
        transcript_min=min(transcript_counts),
        transcript_max=max(transcript_counts),
        reference_mean=mean(reference_counts),
        reference_sd=sample_sd(reference_counts),
        reference_min=min(reference_counts),
        reference_max=max(reference_counts),
    )


def save_corpus(corpus: Corpus, root: Path | str) -> None:
    """Write the corpus back to disk in the standard layout.

    Transcripts are written verbatim; reports are written in canonical form,
    so word counts are stable under load -> save -> load.
    """
    root = Path(root)
    for name in ("transcripts", "references", "shots"):
        (root / name).mkdir(parents=True, exist_ok=True)
    for transcript in corpus.transcripts:
        (root / "transcripts" / f"{transcript.id}.txt").write_text(
            transcript.text, encoding="utf-8"
        )
    for reference in corpus.references:
        (root / "references" / f"{reference.id}{SOAP_SUFFIX}").write_text(
            render_soap(reference.report) + "\n", encoding="utf-8"
        )
    for shot in corpus.shots:
        (root / "shots" / f"{shot.id}{SOAP_SUFFIX}").write_text(
            render_soap(shot.report) + "\n", encoding="utf-8"
        )
        if shot.transcript is not None:
            (root / "shots" / f"{shot.id}.txt").write_text(shot.transcript, encoding="utf-8")


def shuffle_split(corpus: Corpus, seed: int, shot_count: int = 2) -> Corpus:
    """Deterministically re-partition consultations into inputs and shot examples.

    Requires every pooled consultation (current inputs and current shots) to
    carry both a transcript and a report; shots without a paired transcript
    cannot become inputs.
    """
    pool: dict[str, tuple[str, SoapReport]] = {}
    for transcript in corpus.transcripts:
        pool[transcript.id] = (transcript.text, corpus.reference_for(transcript.id).report)
    for shot in corpus.shots:
        if shot.transcript is None:
            raise CorpusError(f"cannot shuffle split: shot {shot.id} has no transcript")
        pool[shot.id] = (shot.transcript, shot.report)
    if shot_count >= len(pool):
        raise CorpusError(
            f"cannot reserve {shot_count} shots from {len(pool)} consultations"
        )
    ids = sorted(pool)
    shot_ids = set(random.Random(seed).sample(ids, shot_count))
    transcripts = []
    references = []
    shots = []
    for consultation_id in ids:
        text, report = pool[consultation_id]
        if consultation_id in shot_ids:
            shots.append(ShotExample(consultation_id, report, text))
        else:
            transcripts.append(Transcript.from_text(consultation_id, text))
            references.append(ReferenceReport.from_report(consultation_id, report))
    return Corpus(tuple(transcripts), tuple(references), tuple(shots))
