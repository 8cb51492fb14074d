"""ROUGE-1 and ROUGE-L, implemented from scratch.

Tokenization is Unicode-aware and Dutch-suitable: lowercase, split on every
non-alphanumeric character, digits kept, no stemming, no stopword removal.
ROUGE-L uses the plain longest common subsequence over the whole token
sequences. Reported experiment numbers are F1; precision and recall are kept
on every score so the choice stays auditable.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

TokenSequence = list[str]

# \w minus underscore: alphanumerics only, Unicode-aware.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def token_spans(text: str) -> list[tuple[int, int]]:
    """Character (start, end) offsets of every token in the original text."""
    return [match.span() for match in _TOKEN_RE.finditer(text)]


def tokenize(text: str, keep_punctuation: bool = False) -> TokenSequence:
    """Lowercased tokens of ``text``; empty text yields an empty sequence.

    ``keep_punctuation`` switches to plain whitespace splitting (punctuation
    stays attached to words), exposed as a sensitivity toggle.
    """
    if keep_punctuation:
        return [word.lower() for word in text.split()]
    return [text[start:end].lower() for start, end in token_spans(text)]


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    """Longest common subsequence length in O(|a|*|b|) time, O(min) memory."""
    if len(b) > len(a):
        a, b = b, a
    if not b:
        return 0
    previous = [0] * (len(b) + 1)
    for token in a:
        current = [0]
        for j, other in enumerate(b, start=1):
            if token == other:
                current.append(previous[j - 1] + 1)
            else:
                current.append(max(previous[j], current[j - 1]))
        previous = current
    return previous[-1]


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_pr(cls, precision: float, recall: float) -> "RougeScore":
        if precision + recall > 0:
            f1 = 2 * precision * recall / (precision + recall)
        else:
            f1 = 0.0
        return cls(precision, recall, f1)

    def to_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}

    @classmethod
    def from_dict(cls, data: dict) -> "RougeScore":
        return cls(data["precision"], data["recall"], data["f1"])


ZERO_SCORE = RougeScore(0.0, 0.0, 0.0)


def _pr_score(match: int, candidate_len: int, reference_len: int) -> RougeScore:
    if candidate_len == 0 or reference_len == 0:
        return ZERO_SCORE
    return RougeScore.from_pr(match / candidate_len, match / reference_len)


def rouge1(candidate: Sequence[str], reference: Sequence[str]) -> RougeScore:
    """Unigram multiset-overlap precision/recall/F1."""
    overlap = sum((Counter(candidate) & Counter(reference)).values())
    return _pr_score(overlap, len(candidate), len(reference))


def rougeL(candidate: Sequence[str], reference: Sequence[str]) -> RougeScore:
    """LCS-based precision/recall/F1."""
    return _pr_score(lcs_length(candidate, reference), len(candidate), len(reference))


@dataclass(frozen=True)
class ScorePair:
    rouge1: RougeScore
    rougeL: RougeScore

    def to_dict(self) -> dict:
        return {"rouge1": self.rouge1.to_dict(), "rougeL": self.rougeL.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> "ScorePair":
        return cls(
            RougeScore.from_dict(data["rouge1"]),
            RougeScore.from_dict(data["rougeL"]),
        )


def score_pair(
    candidate_text: str, reference_text: str, keep_punctuation: bool = False
) -> ScorePair:
    """Tokenize both texts and compute ROUGE-1 and ROUGE-L."""
    candidate = tokenize(candidate_text, keep_punctuation)
    reference = tokenize(reference_text, keep_punctuation)
    return ScorePair(rouge1(candidate, reference), rougeL(candidate, reference))
