"""Run variants x transcripts x repeats, persist every run, aggregate scores.

The ledger (``runs.jsonl``, one JSON object per line) is append-only and
resumable: records already on disk are skipped without a backend call. The
identity key is (variant_id, consultation_id, run_index); if the prompt pack
changed under an existing ledger, digest mismatches are surfaced as stale
warnings rather than silently re-run.

Aggregation follows the two-level scheme: mean F1 per consultation over the
repeated runs, then mean and sample SD across the consultation means, for
ROUGE-1 and ROUGE-L independently. Failed runs are excluded and counted,
never silently dropped.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

from . import errors
from .corpus import load_corpus, shuffle_split
from .llm import BackendConfig, CompletionRequest, make_backend, request_digest
from .prompts import (
    PromptPack,
    PromptVariant,
    RenderedPrompt,
    default_prompt_pack,
    generate_matrix,
    load_prompt_pack,
    render_prompt,
    select_variants,
)
from .rouge import RougeScore, ScorePair, score_pair
from .soap import render_soap
from .stats import mean, sample_sd

EPOCH_TIMESTAMP = "1970-01-01T00:00:00Z"


@dataclass(frozen=True)
class ExperimentConfig:
    corpus_root: Path
    output_dir: Path
    prompt_pack: Path | None = None
    variants: tuple[str, ...] | None = None  # None or ("all",) selects the full matrix
    repeats: int = 5
    model: str = "gpt-4"
    temperature: float = 0.0
    backend: BackendConfig = field(default_factory=BackendConfig)
    concurrency: int = 2
    keep_punctuation: bool = False
    shuffle_split: int | None = None  # seed; re-partitions inputs/shots before running

    def __post_init__(self):
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if self.concurrency < 1:
            raise ValueError("concurrency must be >= 1")


@dataclass(frozen=True)
class RunRecord:
    variant_id: str
    consultation_id: str
    run_index: int
    request_digest: str
    response_text: str
    score: ScorePair | None
    timestamp: str
    error: str | None = None

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.variant_id, self.consultation_id, self.run_index)

    def to_json(self) -> dict:
        return {
            "variant_id": self.variant_id,
            "consultation_id": self.consultation_id,
            "run_index": self.run_index,
            "request_digest": self.request_digest,
            "response_text": self.response_text,
            "score": self.score.to_dict() if self.score else None,
            "timestamp": self.timestamp,
            "error": self.error,
        }

    @classmethod
    def from_json(cls, data: dict) -> "RunRecord":
        return cls(
            variant_id=data["variant_id"],
            consultation_id=data["consultation_id"],
            run_index=data["run_index"],
            request_digest=data["request_digest"],
            response_text=data["response_text"],
            score=ScorePair.from_dict(data["score"]) if data.get("score") else None,
            timestamp=data["timestamp"],
            error=data.get("error"),
        )


@dataclass
class RunLedger:
    path: Path | None
    records: list[RunRecord] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def failures(self) -> list[RunRecord]:
        return [record for record in self.records if record.error is not None]


def _record_line(record: RunRecord) -> str:
    return json.dumps(record.to_json(), ensure_ascii=False, sort_keys=True) + "\n"


def load_ledger(path: Path | str) -> RunLedger:
    """Read a runs.jsonl file; a partial trailing line (crash) is dropped with a warning."""
    path = Path(path)
    ledger = RunLedger(path=path)
    seen: set[tuple[str, str, int]] = set()
    with open(path, encoding="utf-8") as handle:
        for number, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                record = RunRecord.from_json(json.loads(stripped))
            except (json.JSONDecodeError, KeyError) as exc:
                if not line.endswith("\n"):
                    ledger.warnings.append(f"{path}:{number}: dropped partial trailing line")
                    continue
                raise errors.LedgerError(f"{path}:{number}: bad record: {exc}") from exc
            if record.key in seen:
                raise errors.LedgerError(f"{path}:{number}: duplicate run key {record.key}")
            seen.add(record.key)
            ledger.records.append(record)
    return ledger


@dataclass(frozen=True)
class _Task:
    variant_id: str
    consultation_id: str
    run_index: int
    rendered: RenderedPrompt
    digest: str
    reference_text: str


def _load_pack(config: ExperimentConfig) -> PromptPack:
    if config.prompt_pack is not None:
        return load_prompt_pack(config.prompt_pack)
    return default_prompt_pack()


def run_experiment(config: ExperimentConfig, backend=None) -> RunLedger:
    """Execute the experiment described by ``config``; resumable and bounded.

    ``backend`` may be injected (e.g. a shared MockBackend whose call counter
    the caller wants to observe); by default it is built from config.backend.
    """
    corpus = load_corpus(config.corpus_root)
    if config.shuffle_split is not None:
        corpus = shuffle_split(corpus, config.shuffle_split)
    pack = _load_pack(config)
    variants = select_variants(generate_matrix(pack, list(corpus.shots)), config.variants)
    if backend is None:
        backend = make_backend(config.backend)

    output_dir = Path(config.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    ledger_path = output_dir / "runs.jsonl"
    ledger = load_ledger(ledger_path) if ledger_path.exists() else RunLedger(path=ledger_path)
    done = {record.key: record for record in ledger.records}

    references = {ref.id: render_soap(ref.report) for ref in corpus.references}
    tasks: list[_Task] = []
    for variant in variants:
        for transcript in corpus.transcripts:
            rendered = render_prompt(
                variant,
                transcript,
                example_header=pack.example_header,
                example_transcript_header=pack.example_transcript_header,
                flat=pack.flat,
            )
            digest = request_digest(rendered.messages)
            for run_index in range(config.repeats):
                key = (variant.id, transcript.id, run_index)
                if key in done:
                    if done[key].request_digest != digest:
                        ledger.warnings.append(
                            "stale ledger: %s/%s#%d was produced by a different prompt; "
                            "use a fresh output dir to re-run" % key
                        )
                    continue
                tasks.append(
                    _Task(variant.id, transcript.id, run_index, rendered, digest,
                          references[transcript.id])
                )

    # Fail fast with the variable name before any network work; a complete
    # ledger (no tasks) must stay re-runnable without credentials.
    if (
        tasks
        and config.backend.kind == "remote"
        and not os.environ.get(config.backend.credential)
    ):
        raise errors.MissingCredential(
            f"environment variable {config.backend.credential} is not set"
        )

    deterministic = bool(getattr(backend, "deterministic", False))

    def execute(task: _Task) -> RunRecord:
        timestamp = (
            EPOCH_TIMESTAMP
            if deterministic
            else datetime.now(timezone.utc).isoformat(timespec="seconds")
        )
        request = CompletionRequest(
            model=config.model,
            messages=task.rendered.messages,
            temperature=config.temperature,
            run_index=task.run_index,
        )
        try:
            response = backend.complete(request)
            score = score_pair(response.text, task.reference_text, config.keep_punctuation)
            return RunRecord(
                task.variant_id, task.consultation_id, task.run_index,
                task.digest, response.text, score, timestamp,
            )
        except errors.BackendError as exc:
            return RunRecord(
                task.variant_id, task.consultation_id, task.run_index,
                task.digest, "", None, timestamp,
                error=f"{type(exc).__name__}: {exc}",
            )

    if tasks:
        # map() yields in submission order, so the file stays deterministic
        # even with concurrent execution; appends happen on this thread only.
        with ThreadPoolExecutor(max_workers=config.concurrency) as pool, \
                open(ledger_path, "a", encoding="utf-8") as handle:
            for record in pool.map(execute, tasks):
                handle.write(_record_line(record))
                ledger.records.append(record)
    return ledger


@dataclass(frozen=True)
class VariantAggregate:
    variant_id: str
    per_consultation: dict[str, ScorePair]
    rouge1_mean: float
    rouge1_sd: float
    rougeL_mean: float
    rougeL_sd: float
    excluded_runs: int = 0

    def to_json(self) -> dict:
        return {
            "variant_id": self.variant_id,
            "per_consultation": {
                cid: pair.to_dict() for cid, pair in sorted(self.per_consultation.items())
            },
            "rouge1_mean": self.rouge1_mean,
            "rouge1_sd": self.rouge1_sd,
            "rougeL_mean": self.rougeL_mean,
            "rougeL_sd": self.rougeL_sd,
            "excluded_runs": self.excluded_runs,
        }


def _mean_score(scores: Sequence[RougeScore]) -> RougeScore:
    return RougeScore(
        mean([s.precision for s in scores]),
        mean([s.recall for s in scores]),
        mean([s.f1 for s in scores]),
    )


def aggregate(ledger: RunLedger | Iterable[RunRecord]) -> list[VariantAggregate]:
    """Two-level aggregation over scored runs, sorted by variant id.

    Sorting the records before folding makes the result invariant under any
    permutation of the ledger, including float summation order.
    """
    records = ledger.records if isinstance(ledger, RunLedger) else list(ledger)
    usable = sorted(
        (r for r in records if r.error is None and r.score is not None),
        key=lambda r: r.key,
    )
    if not usable:
        raise errors.EmptyLedger("no scored runs to aggregate")
    failed: dict[str, int] = {}
    for record in records:
        if record.error is not None:
            failed[record.variant_id] = failed.get(record.variant_id, 0) + 1

    grouped: dict[str, dict[str, list[RunRecord]]] = {}
    for record in usable:
        grouped.setdefault(record.variant_id, {}).setdefault(
            record.consultation_id, []
        ).append(record)

    aggregates = []
    for variant_id in sorted(grouped):
        by_consultation = grouped[variant_id]
        per_consultation = {
            cid: ScorePair(
                _mean_score([r.score.rouge1 for r in runs]),
                _mean_score([r.score.rougeL for r in runs]),
            )
            for cid, runs in sorted(by_consultation.items())
        }
        rouge1_f1s = [pair.rouge1.f1 for _, pair in sorted(per_consultation.items())]
        rougeL_f1s = [pair.rougeL.f1 for _, pair in sorted(per_consultation.items())]
        aggregates.append(
            VariantAggregate(
                variant_id=variant_id,
                per_consultation=per_consultation,
                rouge1_mean=mean(rouge1_f1s),
                rouge1_sd=sample_sd(rouge1_f1s),
                rougeL_mean=mean(rougeL_f1s),
                rougeL_sd=sample_sd(rougeL_f1s),
                excluded_runs=failed.get(variant_id, 0),
            )
        )
    return aggregates


def write_aggregates(aggregates: Sequence[VariantAggregate], path: Path | str) -> None:
    payload = {
        "schema_version": 1,
        "excluded_runs": sum(a.excluded_runs for a in aggregates),
        "variants": [a.to_json() for a in aggregates],
    }
    Path(path).write_text(
        json.dumps(payload, indent=2, ensure_ascii=False, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def load_aggregates(path: Path | str) -> list[VariantAggregate]:
    with open(path, encoding="utf-8") as handle:
        payload = json.load(handle)
    return [
        VariantAggregate(
            variant_id=item["variant_id"],
            per_consultation={
                cid: ScorePair.from_dict(pair)
                for cid, pair in item["per_consultation"].items()
            },
            rouge1_mean=item["rouge1_mean"],
            rouge1_sd=item["rouge1_sd"],
            rougeL_mean=item["rougeL_mean"],
            rougeL_sd=item["rougeL_sd"],
            excluded_runs=item["excluded_runs"],
        )
        for item in payload["variants"]
    ]


_SHOT_ORDER = {"zero-shot": 0, "one-shot": 1, "two-shot": 2}
_GROUP_ORDER = (
    "Shot prompting",
    "Context: Scope",
    "Context: Domain",
    "Context: Total",
    "Context: Other",
)


def _context_keys(variant_id: str) -> tuple[str, ...]:
    return tuple(variant_id.split("+")[1:])


def _variant_group(variant_id: str) -> str:
    keys = set(_context_keys(variant_id))
    if not keys:
        return "Shot prompting"
    if keys == {"a", "b", "c", "d"}:
        return "Context: Total"
    if keys <= {"a", "b"}:
        return "Context: Scope"
    if keys <= {"c", "d"}:
        return "Context: Domain"
    return "Context: Other"


def _variant_label(variant_id: str) -> str:
    keys = _context_keys(variant_id)
    if not keys:
        return variant_id.capitalize()
    return "Context " + " & ".join(keys)


def _variant_sort_key(variant_id: str):
    shot = variant_id.split("+")[0]
    keys = _context_keys(variant_id)
    return (_SHOT_ORDER.get(shot, 99), len(keys), keys)


def render_table(aggregates: Sequence[VariantAggregate]) -> str:
    """Text table of mean±SD per variant, grouped like the study's result tables."""
    header_label = "Variant"
    rows: dict[str, list[tuple[str, str, str]]] = {group: [] for group in _GROUP_ORDER}
    for agg in sorted(aggregates, key=lambda a: _variant_sort_key(a.variant_id)):
        rows[_variant_group(agg.variant_id)].append(
            (
                _variant_label(agg.variant_id),
                f"{agg.rouge1_mean:.3f}±{agg.rouge1_sd:.3f}",
                f"{agg.rougeL_mean:.3f}±{agg.rougeL_sd:.3f}",
            )
        )
    labels = [label for group in _GROUP_ORDER for label, _, _ in rows[group]]
    width = max([len(header_label)] + [len(label) for label in labels], default=len(header_label))
    lines = [f"{header_label:<{width}}  ROUGE1 Mean±SD  ROUGEL Mean±SD"]
    for group in _GROUP_ORDER:
        if not rows[group]:
            continue
        lines.append(f"-- {group} --")
        for label, r1, rl in rows[group]:
            lines.append(f"{label:<{width}}  {r1:<14}  {rl}")
    return "\n".join(lines)


def recompute_score(record: RunRecord, reference_text: str,
                    keep_punctuation: bool = False) -> ScorePair:
    """Recompute the stored score from response_text; used for audit checks."""
    return score_pair(record.response_text, reference_text, keep_punctuation)
