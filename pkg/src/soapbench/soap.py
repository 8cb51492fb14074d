"""Parse, render, and measure SOAP-structured clinical reports.

A report has four sections (Subjective, Objective, Assessment, Plan) plus an
optional ``extra`` block holding text that sits under no recognized marker,
e.g. a trailing "NB:" addendum. The canonical text form is::

    S: <subjective>
    O: <objective>
    A: <assessment>
    P: <plan>
    <extra, verbatim>

Empty sections render as bare markers ("O:"). A report is *canonical* when
``parse_soap(render_soap(report)) == report``; texts that cannot round-trip
(section content with trailing newlines, an extra block that does not start
with a header-shaped line) still parse, but the resulting report is flagged
by :func:`report_violations`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import NoSectionsFound

SECTION_FIELDS = ("subjective", "objective", "assessment", "plan")
SECTION_MARKERS = ("S", "O", "A", "P")

# Line-initial markers: single letters plus full English and Dutch names.
_MARKER_NAMES = {
    "s": "subjective",
    "subjective": "subjective",
    "subjectief": "subjective",
    "o": "objective",
    "objective": "objective",
    "objectief": "objective",
    "a": "assessment",
    "assessment": "assessment",
    "evaluatie": "assessment",
    "p": "plan",
    "plan": "plan",
}
_MARKER_RE = re.compile(
    r"^(s|o|a|p|subjective|objective|assessment|plan|subjectief|objectief|evaluatie):",
    re.IGNORECASE,
)
# Header-shaped lines that are not recognized markers open the extra block.
_HEADER_RE = re.compile(r"^[A-Za-z][A-Za-z0-9 .&/-]{0,30}:")


@dataclass(frozen=True)
class SoapReport:
    subjective: str = ""
    objective: str = ""
    assessment: str = ""
    plan: str = ""
    extra: str = ""

    def sections(self) -> tuple[str, str, str, str]:
        return (self.subjective, self.objective, self.assessment, self.plan)


def parse_soap(text: str) -> SoapReport:
    """Split report text on line-initial section markers.

    Markers are case-insensitive; later occurrences of the same marker are
    concatenated to the section with a newline. Text before the first marker
    or under an unrecognized header lands in ``extra``.

    Raises NoSectionsFound when no marker matches (including empty input).
    """
    body = text[:-1] if text.endswith("\n") else text
    parts: dict[str, list[str]] = {name: [] for name in SECTION_FIELDS}
    extra: list[str] = []
    seen_marker = False
    target: list[str] | None = None
    for line in body.split("\n"):
        match = _MARKER_RE.match(line)
        if match:
            seen_marker = True
            target = parts[_MARKER_NAMES[match.group(1).lower()]]
            rest = line[match.end():]
            if rest.startswith(" "):
                rest = rest[1:]
            target.append(rest)
        elif target is not None and not _HEADER_RE.match(line):
            target.append(line)
        else:
            # Leading text, or an unrecognized header and everything below it.
            target = None
            extra.append(line)
    if not seen_marker:
        raise NoSectionsFound("no SOAP section marker found in report text")
    return SoapReport(
        **{name: "\n".join(lines) for name, lines in parts.items()},
        extra="\n".join(extra),
    )


def render_soap(report: SoapReport) -> str:
    """Render the canonical text form; extra is appended verbatim."""
    lines = []
    for marker, content in zip(SECTION_MARKERS, report.sections()):
        lines.append(f"{marker}: {content}" if content else f"{marker}:")
    text = "\n".join(lines)
    if report.extra:
        text = text + "\n" + report.extra
    return text


def report_violations(report: SoapReport) -> list[str]:
    """Invariant check: at least one populated section, canonical round trip."""
    violations = []
    if not any(report.sections()):
        violations.append("all sections empty")
    try:
        rebuilt = parse_soap(render_soap(report))
    except NoSectionsFound:  # pragma: no cover - render always emits markers
        rebuilt = None
    if rebuilt != report:
        violations.append("non-canonical report (parse(render(r)) != r)")
    return violations


@dataclass(frozen=True)
class SectionWordCounts:
    """Whitespace word counts per section; total covers the four sections only."""

    subjective: int
    objective: int
    assessment: int
    plan: int
    total: int

    @classmethod
    def from_report(cls, report: SoapReport) -> "SectionWordCounts":
        counts = [len(section.split()) for section in report.sections()]
        return cls(*counts, total=sum(counts))


@dataclass(frozen=True)
class SectionDeltas:
    """Signed per-section differences (generated minus reference)."""

    subjective: int
    objective: int
    assessment: int
    plan: int
    total: int


def section_word_counts(
    generated: SoapReport, reference: SoapReport
) -> tuple[SectionWordCounts, SectionWordCounts, SectionDeltas]:
    """Word counts for both reports plus generated-minus-reference differences."""
    gen = SectionWordCounts.from_report(generated)
    ref = SectionWordCounts.from_report(reference)
    deltas = SectionDeltas(
        subjective=gen.subjective - ref.subjective,
        objective=gen.objective - ref.objective,
        assessment=gen.assessment - ref.assessment,
        plan=gen.plan - ref.plan,
        total=gen.total - ref.total,
    )
    return gen, ref, deltas
