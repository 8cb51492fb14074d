"""Compose the prompt-variant matrix: base instruction, shots, context statements.

The default matrix is the three shot strategies (no context) plus, on the
best-performing shot strategy (two-shot by default), seven context variants:
{a}, {b}, {a,b}, {c}, {d}, {c,d}, {a,b,c,d}. Statements a/b fix scope and
role, c/d encode domain conventions; an optional ``abbrev`` statement carries
an abbreviation list. Extra context sets (e.g. {a,b,c}) can be appended via
the prompt pack.

All texts live in a human-editable prompt-pack JSON file; the shipped default
is English. Rendering is pure: the same variant and transcript always produce
the same messages.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import ShotExample, Transcript
from .errors import InsufficientShots, UnknownVariant
from .soap import render_soap

TRANSCRIPT_PLACEHOLDER = "{transcript}"

CONTEXT_KEYS = ("a", "b", "c", "d", "abbrev")

DEFAULT_STATEMENTS = {
    "a": "Within the scope of medical dialogue summarization.",
    "b": (
        "Consider that you are a general practitioner who writes the medical "
        "report during the consultation."
    ),
    "c": (
        "Consider that the report is used for communication between doctors "
        "who use abbreviations and short sentences or keywords."
    ),
    "d": (
        "Consider that in the medical field, the division between left and "
        "right, and the medication dosage are important."
    ),
    "abbrev": (
        "Consider the following abbreviations used in medical reports: "
        "OMA = otitis media acuta, OE = otitis externa, ENT = ear nose throat "
        "specialist, AB = antibiotics, wk = week, re = right ear, le = left ear."
    ),
}

DEFAULT_INSTRUCTION = (
    "Write the medical report of the following consultation transcript.\n\n"
    "Transcript:\n{transcript}"
)
DEFAULT_CONSTRAINT = (
    "Use only elements that are present in the transcript; do not add "
    "information that does not appear in it."
)
DEFAULT_FORMAT_INSTRUCTION = (
    "Write the report in SOAP format, using the markers S:, O:, A: and P: "
    "at the start of each section."
)
DEFAULT_EXAMPLE_HEADER = "Example report:"
DEFAULT_EXAMPLE_TRANSCRIPT_HEADER = "Example transcript:"


class ShotKind(str, Enum):
    ZERO = "zero-shot"
    ONE = "one-shot"
    TWO = "two-shot"

    @property
    def count(self) -> int:
        return {"zero-shot": 0, "one-shot": 1, "two-shot": 2}[self.value]


@dataclass(frozen=True)
class Message:
    role: str  # "system" | "user"
    content: str


@dataclass(frozen=True)
class BaseTemplate:
    instruction: str = DEFAULT_INSTRUCTION
    constraint: str = DEFAULT_CONSTRAINT
    format_instruction: str = DEFAULT_FORMAT_INSTRUCTION

    def __post_init__(self):
        occurrences = self.instruction.count(TRANSCRIPT_PLACEHOLDER)
        if occurrences != 1:
            raise ValueError(
                f"instruction must contain {TRANSCRIPT_PLACEHOLDER!r} exactly once "
                f"(found {occurrences})"
            )
        if not self.constraint:
            raise ValueError("constraint must be non-empty")


@dataclass(frozen=True)
class ContextStatement:
    key: str
    text: str

    def __post_init__(self):
        if self.key not in CONTEXT_KEYS:
            raise ValueError(f"unknown context key {self.key!r}")


@dataclass(frozen=True)
class ShotStrategy:
    kind: ShotKind
    examples: tuple[ShotExample, ...] = ()
    include_transcript: bool = False

    def __post_init__(self):
        if len(self.examples) != self.kind.count:
            raise ValueError(
                f"{self.kind.value} needs {self.kind.count} examples, "
                f"got {len(self.examples)}"
            )


@dataclass(frozen=True)
class PromptVariant:
    id: str
    base: BaseTemplate
    shots: ShotStrategy
    contexts: tuple[ContextStatement, ...] = ()


@dataclass(frozen=True)
class RenderedPrompt:
    messages: tuple[Message, ...]

    def to_payload(self) -> list[dict]:
        return [{"role": m.role, "content": m.content} for m in self.messages]


def variant_id(kind: ShotKind, context_keys: Iterable[str]) -> str:
    """Deterministic filesystem-safe id, injective over (kind, key set)."""
    ordered = sorted(set(context_keys), key=CONTEXT_KEYS.index)
    return kind.value + "".join(f"+{key}" for key in ordered)


@dataclass(frozen=True)
class PromptPack:
    """Everything configurable about prompt texts and the variant matrix."""

    base: BaseTemplate = BaseTemplate()
    statements: Mapping[str, str] = field(default_factory=lambda: dict(DEFAULT_STATEMENTS))
    example_header: str = DEFAULT_EXAMPLE_HEADER
    example_transcript_header: str = DEFAULT_EXAMPLE_TRANSCRIPT_HEADER
    shot_kinds: tuple[ShotKind, ...] = (ShotKind.ZERO, ShotKind.ONE, ShotKind.TWO)
    best_shots: ShotKind = ShotKind.TWO
    context_sets: tuple[tuple[str, ...], ...] = (
        ("a",),
        ("b",),
        ("a", "b"),
        ("c",),
        ("d",),
        ("c", "d"),
        ("a", "b", "c", "d"),
    )
    extra_context_sets: tuple[tuple[str, ...], ...] = ()
    include_shot_transcripts: bool = False
    flat: bool = False

    def statement(self, key: str) -> ContextStatement:
        return ContextStatement(key, self.statements[key])

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "base": {
                "instruction": self.base.instruction,
                "constraint": self.base.constraint,
                "format_instruction": self.base.format_instruction,
            },
            "statements": dict(self.statements),
            "example_header": self.example_header,
            "example_transcript_header": self.example_transcript_header,
            "matrix": {
                "shot_kinds": [kind.value for kind in self.shot_kinds],
                "best_shots": self.best_shots.value,
                "context_sets": [list(keys) for keys in self.context_sets],
                "extra_context_sets": [list(keys) for keys in self.extra_context_sets],
            },
            "include_shot_transcripts": self.include_shot_transcripts,
            "flat": self.flat,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "PromptPack":
        defaults = cls()
        base_data = data.get("base", {})
        base = BaseTemplate(
            instruction=base_data.get("instruction", defaults.base.instruction),
            constraint=base_data.get("constraint", defaults.base.constraint),
            format_instruction=base_data.get(
                "format_instruction", defaults.base.format_instruction
            ),
        )
        statements = dict(DEFAULT_STATEMENTS)
        statements.update(data.get("statements", {}))
        matrix = data.get("matrix", {})
        return cls(
            base=base,
            statements=statements,
            example_header=data.get("example_header", defaults.example_header),
            example_transcript_header=data.get(
                "example_transcript_header", defaults.example_transcript_header
            ),
            shot_kinds=tuple(
                ShotKind(value)
                for value in matrix.get("shot_kinds", [k.value for k in defaults.shot_kinds])
            ),
            best_shots=ShotKind(matrix.get("best_shots", defaults.best_shots.value)),
            context_sets=tuple(
                tuple(keys) for keys in matrix.get("context_sets", defaults.context_sets)
            ),
            extra_context_sets=tuple(
                tuple(keys) for keys in matrix.get("extra_context_sets", ())
            ),
            include_shot_transcripts=data.get("include_shot_transcripts", False),
            flat=data.get("flat", False),
        )


def default_prompt_pack() -> PromptPack:
    return PromptPack()


def load_prompt_pack(path: Path | str) -> PromptPack:
    with open(path, encoding="utf-8") as handle:
        return PromptPack.from_dict(json.load(handle))


def save_prompt_pack(pack: PromptPack, path: Path | str) -> None:
    Path(path).write_text(
        json.dumps(pack.to_dict(), indent=2, ensure_ascii=False, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def matrix_ids(pack: PromptPack) -> list[str]:
    """Variant ids of the matrix, without needing shot examples."""
    ids = [variant_id(kind, ()) for kind in pack.shot_kinds]
    for keys in tuple(pack.context_sets) + tuple(pack.extra_context_sets):
        ids.append(variant_id(pack.best_shots, keys))
    return ids


def generate_matrix(pack: PromptPack, shots: Sequence[ShotExample]) -> list[PromptVariant]:
    """Build the full list of prompt variants for ``pack``.

    Deterministic: two calls with the same configuration yield identical
    lists. Shot examples are taken in corpus order.
    """
    needed = max(kind.count for kind in tuple(pack.shot_kinds) + (pack.best_shots,))
    if len(shots) < needed:
        raise InsufficientShots(
            f"matrix needs {needed} shot examples, corpus supplies {len(shots)}"
        )

    def build(kind: ShotKind, keys: tuple[str, ...]) -> PromptVariant:
        strategy = ShotStrategy(
            kind=kind,
            examples=tuple(shots[: kind.count]),
            include_transcript=pack.include_shot_transcripts,
        )
        ordered = sorted(set(keys), key=CONTEXT_KEYS.index)
        contexts = tuple(pack.statement(key) for key in ordered)
        return PromptVariant(variant_id(kind, keys), pack.base, strategy, contexts)

    variants = [build(kind, ()) for kind in pack.shot_kinds]
    for keys in tuple(pack.context_sets) + tuple(pack.extra_context_sets):
        variants.append(build(pack.best_shots, tuple(keys)))
    return variants


def _example_block(
    shot: ShotExample,
    example_header: str,
    example_transcript_header: str,
    include_transcript: bool,
) -> str:
    parts = []
    if include_transcript and shot.transcript is not None:
        parts.extend([example_transcript_header, shot.transcript.rstrip("\n"), ""])
    parts.extend([example_header, render_soap(shot.report)])
    return "\n".join(parts)


def render_prompt(
    variant: PromptVariant,
    transcript: Transcript,
    *,
    example_header: str = DEFAULT_EXAMPLE_HEADER,
    example_transcript_header: str = DEFAULT_EXAMPLE_TRANSCRIPT_HEADER,
    flat: bool = False,
) -> RenderedPrompt:
    """Render a variant against one transcript.

    System message: context statements (a, b, c, d order) + base constraint +
    format instruction. Each shot example becomes its own user message under
    ``example_header``; the final user message is the instruction with the
    transcript substituted byte-identically. ``flat`` merges all non-system
    content into a single user message for non-chat backends.
    """
    system = "\n".join(
        [statement.text for statement in variant.contexts]
        + [variant.base.constraint, variant.base.format_instruction]
    )
    blocks = [
        _example_block(
            shot, example_header, example_transcript_header, variant.shots.include_transcript
        )
        for shot in variant.shots.examples
    ]
    final = variant.base.instruction.replace(TRANSCRIPT_PLACEHOLDER, transcript.text)
    if flat:
        user_messages = [Message("user", "\n\n".join(blocks + [final]))]
    else:
        user_messages = [Message("user", block) for block in blocks] + [Message("user", final)]
    return RenderedPrompt(tuple([Message("system", system)] + user_messages))


def select_variants(
    variants: Sequence[PromptVariant], selection: Sequence[str] | None
) -> list[PromptVariant]:
    """Filter the matrix by id, preserving matrix order; None or "all" keeps all."""
    if selection is None or list(selection) == ["all"]:
        return list(variants)
    by_id = {variant.id: variant for variant in variants}
    unknown = [vid for vid in selection if vid not in by_id]
    if unknown:
        raise UnknownVariant(unknown, [variant.id for variant in variants])
    wanted = set(selection)
    return [variant for variant in variants if variant.id in wanted]
