"""soapbench: prompt-engineering harness for automated SOAP reporting.

Compose a matrix of prompt variants (shot prompting x context statements),
run them against an LLM backend (remote OpenAI-compatible or seeded mock),
score generated reports against human references with ROUGE-1/ROUGE-L, and
tally human-evaluation annotations.
"""

__version__ = "0.1.0"

from .corpus import Corpus, CorpusStats, ReferenceReport, ShotExample, Transcript
from .experiment import (
    ExperimentConfig,
    RunLedger,
    RunRecord,
    VariantAggregate,
    aggregate,
    render_table,
    run_experiment,
)
from .llm import BackendConfig, CompletionRequest, CompletionResponse, complete
from .prompts import (
    BaseTemplate,
    ContextStatement,
    PromptPack,
    PromptVariant,
    RenderedPrompt,
    ShotKind,
    ShotStrategy,
    generate_matrix,
    render_prompt,
    variant_id,
)
from .rouge import RougeScore, ScorePair, lcs_length, rouge1, rougeL, score_pair, tokenize
from .soap import SoapReport, parse_soap, render_soap, section_word_counts

__all__ = [
    "__version__",
    "BackendConfig",
    "BaseTemplate",
    "CompletionRequest",
    "CompletionResponse",
    "ContextStatement",
    "Corpus",
    "CorpusStats",
    "ExperimentConfig",
    "PromptPack",
    "PromptVariant",
    "ReferenceReport",
    "RenderedPrompt",
    "RougeScore",
    "RunLedger",
    "RunRecord",
    "ScorePair",
    "ShotExample",
    "ShotKind",
    "ShotStrategy",
    "SoapReport",
    "Transcript",
    "VariantAggregate",
    "aggregate",
    "complete",
    "generate_matrix",
    "lcs_length",
    "parse_soap",
    "render_prompt",
    "render_soap",
    "render_table",
    "rouge1",
    "rougeL",
    "run_experiment",
    "score_pair",
    "section_word_counts",
    "tokenize",
    "variant_id",
]
