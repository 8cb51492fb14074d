#!/usr/bin/env python3
"""Regenerate the synthetic fixture corpus and annotation files.

The corpus is a synthetic English stand-in whose word-count statistics match
the documented targets exactly: transcripts of 606/1000/1200/1370/1869 words
(mean 1209, range 606-1869) and references of 37/50/60/66/87 words (mean 60,
range 37-87). The annotation fixtures encode the documented error-tally
totals: Factual 14 (6+8), Stylistic 17 (3+14), Omissions 19, Redundant 25.

Deterministic; run from the repo root:  python3 scripts/gen_fixtures.py
"""

from __future__ import annotations

import json
import random
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from soapbench.annotation import AnnotationSet, Annotation, ErrorType, RelevanceVote  # noqa: E402
from soapbench.annotation import save_annotation_file  # noqa: E402
from soapbench.corpus import load_corpus, corpus_stats  # noqa: E402
from soapbench.prompts import default_prompt_pack, save_prompt_pack  # noqa: E402
from soapbench.soap import parse_soap  # noqa: E402

FIXTURES = ROOT / "fixtures"

GP_WORDS = (
    "good morning yes I see your ear looks a bit red and there is some fluid "
    "behind the eardrum we will take a look at both sides please tilt your head "
    "the right eardrum is visible with air bubbles no clear signs of infection "
    "I think you should finish the antibiotics and continue the nasal spray for "
    "another week come back if it is not better then we may refer you to the "
    "ENT specialist how long have you had this pain does it hurt when I press "
    "here any fever or dizziness lately let me check the left side as well that "
    "one was operated on years ago correct keep the ear dry while showering use "
    "the drops twice daily and rest"
).split()

PATIENT_WORDS = (
    "well I came last week because of an ear infection and I am actually getting "
    "sicker since yesterday the pain started about 1,5 weeks ago in my right ear "
    "it feels deaf and blocked it gurgles and rattles when I swallow the first "
    "tablets helped a little but now I feel more tired my resistance is dropping "
    "because of the antibiotics I also use Rhinocort daily for hyperreactivity "
    "my left ear was operated for cholesteatoma no complaints there the side "
    "effects are heavy nausea and headache especially in the morning sometimes "
    "the ear smells a bit and I hear ringing it is worse at night when I lie down"
).split()

REFERENCE_VOCAB = (
    "since weeks ear pain deafness right left received antibiotics from GP "
    "feeling sicker since yesterday side effects Rhinocort daily hyperreactivity "
    "operated cholesteatoma no complaints eardrum visible air bubbles signs "
    "infection OMA advice xylomethazine 1 wk continue antibiotics review "
    "symptoms week consider Flixonase referral ENT fluid nasal spray drops "
    "keep dry rest check fever tired blocked"
).split()

TRANSCRIPT_WORDS = {"2006": 606, "2028": 1000, "2101": 1200, "2204": 1370, "2305": 1869}
# Per-section reference word counts (S, O, A, P); totals 37/50/60/66/87.
REFERENCE_SECTIONS = {
    "2006": (15, 9, 4, 9),
    "2028": (20, 12, 5, 13),
    "2101": (24, 14, 6, 16),
    "2204": (26, 15, 7, 18),
    "2305": (35, 20, 8, 24),
}
SHOT_SECTIONS = {"2405": (18, 10, 4, 11), "2506": (16, 12, 5, 12)}
SHOT_TRANSCRIPT_WORDS = {"2405": 320, "2506": 410}


def make_transcript(rng: random.Random, total_words: int) -> str:
    """Alternating GP:/P: dialogue with exactly ``total_words`` whitespace tokens."""
    lines = []
    remaining = total_words
    speaker = 0
    while remaining > 0:
        tag = ("GP:", "P:")[speaker % 2]
        pool = (GP_WORDS, PATIENT_WORDS)[speaker % 2]
        # Tag counts as one token; keep at least one token on the last line.
        content = min(rng.randint(8, 14), remaining - 1) if remaining > 1 else 0
        words = [tag] + [rng.choice(pool) for _ in range(content)]
        lines.append(" ".join(words))
        remaining -= len(words)
        speaker += 1
    text = "\n".join(lines) + "\n"
    assert len(text.split()) == total_words
    return text


def make_report(rng: random.Random, sections: tuple[int, int, int, int]) -> str:
    rendered = []
    for marker, count in zip("SOAP", sections):
        words = " ".join(rng.choice(REFERENCE_VOCAB) for _ in range(count))
        rendered.append(f"{marker}: {words}")
    text = "\n".join(rendered) + "\n"
    report = parse_soap(text)
    got = tuple(len(section.split()) for section in report.sections())
    assert got == sections, (got, sections)
    return text


def write_corpus() -> None:
    rng = random.Random(20240131)
    for name in ("transcripts", "references", "shots"):
        (FIXTURES / "corpus" / name).mkdir(parents=True, exist_ok=True)
    for cid, words in TRANSCRIPT_WORDS.items():
        (FIXTURES / "corpus" / "transcripts" / f"{cid}.txt").write_text(
            make_transcript(rng, words), encoding="utf-8"
        )
    for cid, sections in REFERENCE_SECTIONS.items():
        (FIXTURES / "corpus" / "references" / f"{cid}.soap.txt").write_text(
            make_report(rng, sections), encoding="utf-8"
        )
    for cid, sections in SHOT_SECTIONS.items():
        (FIXTURES / "corpus" / "shots" / f"{cid}.soap.txt").write_text(
            make_report(rng, sections), encoding="utf-8"
        )
        (FIXTURES / "corpus" / "shots" / f"{cid}.txt").write_text(
            make_transcript(rng, SHOT_TRANSCRIPT_WORDS[cid]), encoding="utf-8"
        )


CONSULTATIONS = tuple(TRANSCRIPT_WORDS)

# (category, section, count, kinds) targets for the error-tally fixture.
ERROR_TARGETS = (
    ("hallucination", None, 6, None),
    ("incorrect_statement", None, 8, None),
    ("repetition", None, 3, None),
    ("classification_error", None, 14, None),
    ("omission", "S", 10, ("indication of which ear is involved",) * 3
     + ("parts of symptoms mentioned",) * 2 + ("parts of relevant medical history",) * 5),
    ("omission", "O", 4, ("indication of which ear is involved",) * 2
     + ("parts of symptoms observed",) * 2),
    ("omission", "A", 3, ("indication of which ear is involved",) * 3),
    ("omission", "P", 2, ("agreement with patient", "possible future treatment")),
    ("redundant", "S", 7, None),
    ("redundant", "O", 5, None),
    ("redundant", "A", 2, None),
    ("redundant", "P", 9, None),
    ("redundant", "Extra", 2, None),
)


def write_annotations() -> None:
    out = FIXTURES / "annotations"
    out.mkdir(parents=True, exist_ok=True)
    per_consultation = {cid: AnnotationSet(consultation_id=cid) for cid in CONSULTATIONS}
    for category, section, count, kinds in ERROR_TARGETS:
        for index in range(count):
            cid = CONSULTATIONS[index % len(CONSULTATIONS)]
            key_base = f"{category}{'-' + section.lower() if section else ''}"
            annotation = Annotation(
                consultation_id=cid,
                error_type=ErrorType(
                    category, section, kinds[index] if kinds else None
                ),
                dedup_key=f"{key_base}-{index}",
                run_index=index % 5,
                span=None if category == "omission" else (0, 12),
                note=f"synthetic fixture item {index}",
            )
            per_consultation[cid].annotations.append(annotation)
    for cid, annotation_set in per_consultation.items():
        save_annotation_file(annotation_set, out / f"{cid}.json")

    raters = [f"gp{i}" for i in range(1, 7)]
    votes = [RelevanceVote("duration of complaints", rater, "relevant") for rater in raters]
    votes += [
        RelevanceVote("specific complaints", rater, vote)
        for rater, vote in zip(raters, ("relevant", "relevant", "relevant",
                                        "neutral", "neutral", "not_relevant"))
    ]
    votes += [
        RelevanceVote("discussed treatment", rater, vote)
        for rater, vote in zip(raters, ("relevant", "relevant", "not_relevant",
                                        "not_relevant", "neutral", "neutral"))
    ]
    save_annotation_file(AnnotationSet(consultation_id=None, votes=votes), out / "votes.json")


def write_config() -> None:
    (FIXTURES / "exp.mock.cfg").write_text(
        "# Experiment config for the shipped fixture corpus (mock backend).\n"
        "corpus_root = corpus\n"
        "prompt_pack = prompt_pack.json\n"
        "output_dir = ../out\n"
        "variants = all\n"
        "repeats = 5\n"
        "backend = mock\n"
        "mock_seed = 7\n"
        "model = mock-gpt\n"
        "concurrency = 2\n",
        encoding="utf-8",
    )


def main() -> None:
    write_corpus()
    save_prompt_pack(default_prompt_pack(), FIXTURES / "prompt_pack.json")
    write_annotations()
    write_config()
    corpus = load_corpus(FIXTURES / "corpus")
    stats = corpus_stats(corpus)
    assert stats.transcript_mean == 1209, stats
    assert (stats.transcript_min, stats.transcript_max) == (606, 1869)
    assert stats.reference_mean == 60, stats
    assert (stats.reference_min, stats.reference_max) == (37, 87)
    print("fixtures written:", FIXTURES)


if __name__ == "__main__":
    main()
