"""Data model and tallies for the human-evaluation protocol.

Three kinds of judgments are recorded:

* error annotations over generated reports, using a four-class taxonomy
  (Factual: hallucination / incorrect statement; Stylistic: repetition /
  classification error; Omissions and Redundant statements, both by SOAP
  section, Redundant also in the trailing extra block);
* word tags categorizing spans of a generated report as identical /
  paraphrased / additional relative to the human reference;
* relevance votes from an expert panel, per addition category.

Error occurrences are deduplicated per consultation: the same underlying
error (same annotator-chosen dedup key, same leaf category) appearing in
several reruns counts once. Omission annotations anchor to the reference
report, because the missing content exists only there.

Annotation file: a JSON document ``{schema_version, consultation_id,
annotations, word_tags, votes}``; ``consultation_id`` may be null for
study-level documents (e.g. a votes-only file).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import AnnotationError, DuplicateVote
from .rouge import token_spans

SOAP_SECTIONS = ("S", "O", "A", "P")
REDUNDANT_SECTIONS = SOAP_SECTIONS + ("Extra",)

ERROR_CLASSES = {
    "hallucination": "Factual",
    "incorrect_statement": "Factual",
    "repetition": "Stylistic",
    "classification_error": "Stylistic",
    "omission": "Omissions",
    "redundant": "Redundant",
}
SECTIONED_CATEGORIES = ("omission", "redundant")

WORD_CATEGORIES = ("identical", "paraphrased", "additional")
UNREVIEWED = "unreviewed"

VOTE_VALUES = ("relevant", "neutral", "not_relevant")

# Addition categories the expert panel voted on, shipped as suggestions.
RELEVANCE_CATEGORIES = (
    "duration of complaints",
    "duration of treatment",
    "previously tried treatments",
    "doctor's observations",
    "specific complaints",
    "referral to which hospital",
    "wait for results",
    "discussed treatment",
    "expected patient actions",
    "other complaints",
)

# Omission kinds observed in the study, shipped as palette suggestions.
OMISSION_KIND_SUGGESTIONS = (
    "indication of which ear is involved",
    "parts of symptoms mentioned",
    "parts of relevant medical history",
    "parts of symptoms observed",
    "agreement with patient",
    "possible future treatment",
)


@dataclass(frozen=True)
class ErrorType:
    category: str
    section: str | None = None
    kind: str | None = None

    def __post_init__(self):
        if self.category not in ERROR_CLASSES:
            raise AnnotationError(f"unknown error category {self.category!r}")
        if self.category in SECTIONED_CATEGORIES:
            allowed = REDUNDANT_SECTIONS if self.category == "redundant" else SOAP_SECTIONS
            if self.section not in allowed:
                raise AnnotationError(
                    f"{self.category} needs a section in {allowed}, got {self.section!r}"
                )
        elif self.section is not None:
            raise AnnotationError(f"{self.category} does not take a section")

    @property
    def error_class(self) -> str:
        return ERROR_CLASSES[self.category]

    @property
    def leaf(self) -> tuple[str, str]:
        return (self.category, self.section or "")

    def to_dict(self) -> dict:
        data = {"category": self.category}
        if self.section is not None:
            data["section"] = self.section
        if self.kind is not None:
            data["kind"] = self.kind
        return data

    @classmethod
    def from_dict(cls, data: Mapping) -> "ErrorType":
        return cls(data["category"], data.get("section"), data.get("kind"))


@dataclass(frozen=True)
class Annotation:
    consultation_id: str
    error_type: ErrorType
    dedup_key: str
    run_index: int | None = None
    span: tuple[int, int] | None = None
    note: str = ""

    def __post_init__(self):
        if not self.dedup_key:
            raise AnnotationError("dedup_key must be non-empty")

    def to_dict(self) -> dict:
        return {
            "consultation_id": self.consultation_id,
            "error_type": self.error_type.to_dict(),
            "dedup_key": self.dedup_key,
            "run_index": self.run_index,
            "span": list(self.span) if self.span else None,
            "note": self.note,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "Annotation":
        span = data.get("span")
        return cls(
            consultation_id=data["consultation_id"],
            error_type=ErrorType.from_dict(data["error_type"]),
            dedup_key=data["dedup_key"],
            run_index=data.get("run_index"),
            span=tuple(span) if span else None,
            note=data.get("note", ""),
        )


@dataclass(frozen=True)
class WordTag:
    consultation_id: str
    run_index: int
    span: tuple[int, int]
    category: str

    def __post_init__(self):
        if self.category not in WORD_CATEGORIES:
            raise AnnotationError(f"unknown word category {self.category!r}")

    def to_dict(self) -> dict:
        return {
            "consultation_id": self.consultation_id,
            "run_index": self.run_index,
            "span": list(self.span),
            "category": self.category,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "WordTag":
        return cls(
            data["consultation_id"], data["run_index"],
            tuple(data["span"]), data["category"],
        )


@dataclass(frozen=True)
class RelevanceVote:
    category: str
    rater_id: str
    vote: str

    def __post_init__(self):
        if self.vote not in VOTE_VALUES:
            raise AnnotationError(f"unknown vote {self.vote!r}")

    def to_dict(self) -> dict:
        return {"category": self.category, "rater_id": self.rater_id, "vote": self.vote}

    @classmethod
    def from_dict(cls, data: Mapping) -> "RelevanceVote":
        return cls(data["category"], data["rater_id"], data["vote"])


@dataclass
class AnnotationSet:
    consultation_id: str | None = None
    annotations: list[Annotation] = field(default_factory=list)
    word_tags: list[WordTag] = field(default_factory=list)
    votes: list[RelevanceVote] = field(default_factory=list)
    schema_version: int = 1

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "consultation_id": self.consultation_id,
            "annotations": [a.to_dict() for a in self.annotations],
            "word_tags": [t.to_dict() for t in self.word_tags],
            "votes": [v.to_dict() for v in self.votes],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "AnnotationSet":
        return cls(
            consultation_id=data.get("consultation_id"),
            annotations=[Annotation.from_dict(a) for a in data.get("annotations", [])],
            word_tags=[WordTag.from_dict(t) for t in data.get("word_tags", [])],
            votes=[RelevanceVote.from_dict(v) for v in data.get("votes", [])],
            schema_version=data.get("schema_version", 1),
        )


def load_annotation_file(path: Path | str) -> AnnotationSet:
    with open(path, encoding="utf-8") as handle:
        return AnnotationSet.from_dict(json.load(handle))


def save_annotation_file(annotation_set: AnnotationSet, path: Path | str) -> None:
    Path(path).write_text(
        json.dumps(annotation_set.to_dict(), indent=2, ensure_ascii=False, sort_keys=True)
        + "\n",
        encoding="utf-8",
    )


def merge_sets(sets: Iterable[AnnotationSet]) -> AnnotationSet:
    merged = AnnotationSet()
    for annotation_set in sets:
        merged.annotations.extend(annotation_set.annotations)
        merged.word_tags.extend(annotation_set.word_tags)
        merged.votes.extend(annotation_set.votes)
    return merged


@dataclass(frozen=True)
class ReportLookup:
    """Report texts the annotations point into."""

    generated: Mapping[tuple[str, int], str]  # (consultation_id, run_index) -> text
    reference: Mapping[str, str]  # consultation_id -> text


def validate_annotations(
    annotation_set: AnnotationSet, reports: ReportLookup
) -> list[str]:
    """Check spans, id resolution, and word-tag overlap; returns violations."""
    violations = []
    for annotation in annotation_set.annotations:
        where = f"{annotation.consultation_id}#{annotation.run_index}"
        if annotation.error_type.category == "omission":
            text = reports.reference.get(annotation.consultation_id)
            if text is None:
                violations.append(f"unresolved reference report: {annotation.consultation_id}")
                continue
        else:
            if annotation.span is not None and annotation.run_index is None:
                violations.append(f"span without run index: {annotation.consultation_id}")
                continue
            if annotation.run_index is None:
                continue
            text = reports.generated.get((annotation.consultation_id, annotation.run_index))
            if text is None:
                violations.append(f"unresolved report: {where}")
                continue
        if annotation.span is not None:
            start, end = annotation.span
            if start >= end:
                violations.append(f"empty span: {where}")
            elif start < 0 or end > len(text):
                violations.append(f"span out of bounds: {where}")
    by_run: dict[tuple[str, int], list[WordTag]] = {}
    for tag in annotation_set.word_tags:
        where = f"{tag.consultation_id}#{tag.run_index}"
        text = reports.generated.get((tag.consultation_id, tag.run_index))
        if text is None:
            violations.append(f"unresolved report: {where}")
            continue
        start, end = tag.span
        if start >= end:
            violations.append(f"empty span: {where}")
        elif start < 0 or end > len(text):
            violations.append(f"span out of bounds: {where}")
        by_run.setdefault((tag.consultation_id, tag.run_index), []).append(tag)
    for (cid, run_index), tags in sorted(by_run.items()):
        ordered = sorted(tags, key=lambda t: t.span)
        for previous, current in zip(ordered, ordered[1:]):
            if current.span[0] < previous.span[1]:
                violations.append(f"overlapping word tags: {cid}#{run_index}")
                break
    return violations


@dataclass(frozen=True)
class ErrorTally:
    leaf_counts: dict[tuple[str, str], int]
    class_totals: dict[str, int]
    total: int


def tally_errors(annotations: Sequence[Annotation]) -> ErrorTally:
    """Deduplicated occurrence counts, grouped by taxonomy leaf and class.

    The dedup unit is (consultation_id, leaf category, dedup_key): the same
    error re-annotated across reruns of one consultation counts once.
    """
    seen: set[tuple[str, tuple[str, str], str]] = set()
    leaf_counts: dict[tuple[str, str], int] = {}
    for annotation in annotations:
        unit = (annotation.consultation_id, annotation.error_type.leaf, annotation.dedup_key)
        if unit in seen:
            continue
        seen.add(unit)
        leaf = annotation.error_type.leaf
        leaf_counts[leaf] = leaf_counts.get(leaf, 0) + 1
    class_totals = {}
    for (category, _), count in leaf_counts.items():
        error_class = ERROR_CLASSES[category]
        class_totals[error_class] = class_totals.get(error_class, 0) + count
    return ErrorTally(leaf_counts, class_totals, sum(class_totals.values()))


def tally_word_categories(
    tags: Sequence[WordTag], generated: Mapping[tuple[str, int], str]
) -> dict[str, int]:
    """Token-weighted counts per word category plus untagged tokens.

    A token belongs to the span containing its start offset, so the category
    counts plus ``unreviewed`` always equal the total token count.
    """
    counts = {category: 0 for category in WORD_CATEGORIES}
    counts[UNREVIEWED] = 0
    by_run: dict[tuple[str, int], list[WordTag]] = {}
    for tag in tags:
        by_run.setdefault((tag.consultation_id, tag.run_index), []).append(tag)
    for key, text in sorted(generated.items()):
        spans = sorted(by_run.get(key, []), key=lambda t: t.span)
        for token_start, _ in token_spans(text):
            category = UNREVIEWED
            for tag in spans:
                if tag.span[0] <= token_start < tag.span[1]:
                    category = tag.category
                    break
            counts[category] += 1
    return counts


@dataclass(frozen=True)
class RelevanceSummary:
    relevant: int
    neutral: int
    not_relevant: int
    consensus: str  # "unanimous" | "split"

    @property
    def counts(self) -> tuple[int, int, int]:
        return (self.relevant, self.neutral, self.not_relevant)


def tally_relevance(votes: Sequence[RelevanceVote]) -> dict[str, RelevanceSummary]:
    """Vote distribution per category with a unanimity flag."""
    per_category: dict[str, dict[str, str]] = {}
    for vote in votes:
        raters = per_category.setdefault(vote.category, {})
        if vote.rater_id in raters:
            raise DuplicateVote(vote.category, vote.rater_id)
        raters[vote.rater_id] = vote.vote
    summary = {}
    for category, raters in sorted(per_category.items()):
        values = list(raters.values())
        summary[category] = RelevanceSummary(
            relevant=values.count("relevant"),
            neutral=values.count("neutral"),
            not_relevant=values.count("not_relevant"),
            consensus="unanimous" if len(set(values)) == 1 else "split",
        )
    return summary


@dataclass(frozen=True)
class TallyReport:
    errors: ErrorTally
    word_counts: dict[str, int]
    relevance: dict[str, RelevanceSummary]


def tally(
    sets: Iterable[AnnotationSet],
    generated: Mapping[tuple[str, int], str] | None = None,
) -> TallyReport:
    """Combined tally over one or more annotation documents.

    Word-category counts need the generated report texts; when ``generated``
    is None that part is empty.
    """
    merged = merge_sets(sets)
    word_counts = (
        tally_word_categories(merged.word_tags, generated) if generated is not None else {}
    )
    return TallyReport(
        errors=tally_errors(merged.annotations),
        word_counts=word_counts,
        relevance=tally_relevance(merged.votes),
    )


def taxonomy() -> dict:
    """Tagging palette served to the annotator UI; covers every taxonomy leaf."""
    return {
        "sections": list(SOAP_SECTIONS),
        "error_types": [
            {
                "category": "hallucination",
                "class": "Factual",
                "label": "Hallucination",
                "requires_section": False,
            },
            {
                "category": "incorrect_statement",
                "class": "Factual",
                "label": "Incorrect statement",
                "requires_section": False,
            },
            {
                "category": "repetition",
                "class": "Stylistic",
                "label": "Repetition",
                "requires_section": False,
            },
            {
                "category": "classification_error",
                "class": "Stylistic",
                "label": "Classification error",
                "requires_section": False,
            },
            {
                "category": "omission",
                "class": "Omissions",
                "label": "Omission",
                "requires_section": True,
                "sections": list(SOAP_SECTIONS),
                "kinds": list(OMISSION_KIND_SUGGESTIONS),
            },
            {
                "category": "redundant",
                "class": "Redundant",
                "label": "Redundant statement",
                "requires_section": True,
                "sections": list(REDUNDANT_SECTIONS),
            },
        ],
        "word_categories": list(WORD_CATEGORIES),
        "vote_values": list(VOTE_VALUES),
        "relevance_categories": list(RELEVANCE_CATEGORIES),
    }
