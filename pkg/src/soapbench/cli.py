"""Command-line entry point.

Subcommands: ``corpus stats``, ``prompt matrix``, ``prompt render``, ``run``,
``aggregate``, ``score``, ``tally``, ``report``, ``serve``. Exit codes:
0 success, 1 domain error, 2 usage error. Human-readable summaries go to
stdout, diagnostics to stderr; machine-readable outputs go to files in the
configured output directory, never interleaved with logs.

The experiment config file is flat ``key = value`` text (``#`` comments);
flags override file values. Keys::

    corpus_root   path to the corpus directory
    prompt_pack   path to the prompt-pack JSON (optional)
    output_dir    where runs.jsonl / aggregates.json / tables.md are written
    variants      comma-separated variant ids, or "all"
    repeats       runs per variant x transcript (default 5)
    model         model name sent to the backend
    temperature   sampling temperature (default 0)
    backend       mock | remote
    mock_seed     seed for the mock backend
    endpoint      remote base URL (an OpenAI-compatible server)
    credential    name of the env var holding the API key
    timeout       request timeout in seconds
    max_attempts  retry budget for transient failures
    base_backoff  first retry delay in seconds
    concurrency   in-flight request limit (default 2)
    keep_punctuation   true to tokenize by whitespace only

Relative paths in the file resolve against the file's directory.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .annotation import (
    ERROR_CLASSES,
    load_annotation_file,
    merge_sets,
    tally_errors,
    tally_relevance,
    tally_word_categories,
)
from .corpus import corpus_stats, load_corpus, shuffle_split
from .errors import NoSectionsFound, SoapBenchError, UnknownVariant
from .experiment import (
    ExperimentConfig,
    aggregate,
    load_ledger,
    render_table,
    run_experiment,
    write_aggregates,
)
from .llm import BackendConfig
from .prompts import (
    default_prompt_pack,
    generate_matrix,
    load_prompt_pack,
    matrix_ids,
    render_prompt,
    select_variants,
)
from .rouge import score_pair
from .serve import build_context, make_server
from .soap import SECTION_FIELDS, parse_soap, section_word_counts


def _fail(message: str, code: int = 1) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _load_config_file(path: Path) -> dict[str, str]:
    values: dict[str, str] = {}
    for number, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise SoapBenchError(f"{path}:{number}: expected 'key = value'")
        values[key.strip()] = value.strip()
    return values


_TRUE = {"1", "true", "yes", "on"}


def _build_experiment_config(args) -> ExperimentConfig:
    values: dict[str, str] = {}
    base_dir = Path.cwd()
    if args.config:
        config_path = Path(args.config)
        if not config_path.exists():
            raise SoapBenchError(f"config file not found: {config_path}")
        values = _load_config_file(config_path)
        base_dir = config_path.parent

    def resolve(value: str | None) -> Path | None:
        if value is None:
            return None
        path = Path(value)
        return path if path.is_absolute() else base_dir / path

    corpus_root = Path(args.corpus) if args.corpus else resolve(values.get("corpus_root"))
    if corpus_root is None:
        raise SoapBenchError("corpus_root is required (config key or --corpus)")
    output_dir = Path(args.output) if args.output else resolve(values.get("output_dir"))
    if output_dir is None:
        raise SoapBenchError("output_dir is required (config key or --output)")
    pack = Path(args.pack) if args.pack else resolve(values.get("prompt_pack"))

    variants_raw = args.variants if args.variants else values.get("variants", "all")
    variants = tuple(v.strip() for v in variants_raw.split(",") if v.strip())

    backend_kind = args.backend or values.get("backend", "mock")
    backend = BackendConfig(
        kind=backend_kind,
        endpoint=values.get("endpoint", ""),
        credential=values.get("credential", "OPENAI_API_KEY"),
        timeout=float(values.get("timeout", "60")),
        max_attempts=int(values.get("max_attempts", "4")),
        base_backoff=float(values.get("base_backoff", "0.5")),
        mock_seed=int(args.mock_seed if args.mock_seed is not None
                      else values.get("mock_seed", "0")),
    )
    shuffle = args.shuffle_split if args.shuffle_split is not None else values.get("shuffle_split")
    return ExperimentConfig(
        corpus_root=corpus_root,
        output_dir=output_dir,
        prompt_pack=pack,
        variants=variants,
        repeats=int(args.repeats if args.repeats is not None else values.get("repeats", "5")),
        model=values.get("model", "gpt-4"),
        temperature=float(values.get("temperature", "0")),
        backend=backend,
        concurrency=int(values.get("concurrency", "2")),
        keep_punctuation=values.get("keep_punctuation", "false").lower() in _TRUE,
        shuffle_split=int(shuffle) if shuffle is not None else None,
    )


# -- subcommands ------------------------------------------------------------


def cmd_corpus_stats(args) -> int:
    corpus = load_corpus(args.corpus)
    if args.shuffle_split is not None:
        corpus = shuffle_split(corpus, args.shuffle_split)
    stats = corpus_stats(corpus)
    if args.json:
        print(json.dumps(stats.__dict__, indent=2, sort_keys=True))
        return 0
    print(f"transcripts: {len(corpus.transcripts)}  references: "
          f"{len(corpus.references)}  shots: {len(corpus.shots)}")
    print(f"transcript words: mean {stats.transcript_mean:.1f} "
          f"(SD {stats.transcript_sd:.1f}), range {stats.transcript_min}-{stats.transcript_max}")
    print(f"reference words:  mean {stats.reference_mean:.1f} "
          f"(SD {stats.reference_sd:.1f}), range {stats.reference_min}-{stats.reference_max}")
    return 0


def cmd_prompt_matrix(args) -> int:
    pack = load_prompt_pack(args.pack) if args.pack else default_prompt_pack()
    for vid in matrix_ids(pack):
        print(vid)
    return 0


def cmd_prompt_render(args) -> int:
    pack = load_prompt_pack(args.pack) if args.pack else default_prompt_pack()
    corpus = load_corpus(args.corpus)
    variants = generate_matrix(pack, list(corpus.shots))
    variant = select_variants(variants, [args.variant])[0]
    transcript = next((t for t in corpus.transcripts if t.id == args.transcript), None)
    if transcript is None:
        return _fail(f"no transcript {args.transcript!r} in corpus")
    rendered = render_prompt(
        variant,
        transcript,
        example_header=pack.example_header,
        example_transcript_header=pack.example_transcript_header,
        flat=pack.flat,
    )
    if args.json:
        print(json.dumps(rendered.to_payload(), indent=2, ensure_ascii=False))
    else:
        for message in rendered.messages:
            print(f"--- {message.role} ---")
            print(message.content)
    return 0


def cmd_run(args) -> int:
    config = _build_experiment_config(args)
    ledger = run_experiment(config)
    for warning in ledger.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    aggregates = aggregate(ledger)
    output_dir = Path(config.output_dir)
    write_aggregates(aggregates, output_dir / "aggregates.json")
    table = render_table(aggregates)
    (output_dir / "tables.md").write_text(table + "\n", encoding="utf-8")
    failed = len(ledger.failures)
    print(table)
    print(f"\n{len(ledger.records)} records in {output_dir / 'runs.jsonl'} "
          f"({failed} failed)")
    if failed:
        return _fail(f"{failed} runs failed; see ledger for details")
    return 0


def cmd_aggregate(args) -> int:
    output_dir = Path(args.output)
    ledger_path = output_dir / "runs.jsonl"
    if not ledger_path.exists():
        return _fail(f"no ledger at {ledger_path}")
    ledger = load_ledger(ledger_path)
    aggregates = aggregate(ledger)
    write_aggregates(aggregates, output_dir / "aggregates.json")
    table = render_table(aggregates)
    (output_dir / "tables.md").write_text(table + "\n", encoding="utf-8")
    print(table)
    return 0


def cmd_score(args) -> int:
    candidate = Path(args.candidate).read_text(encoding="utf-8")
    reference = Path(args.reference).read_text(encoding="utf-8")
    pair = score_pair(candidate, reference, args.keep_punctuation)
    print(json.dumps(pair.to_dict(), indent=2, sort_keys=True))
    return 0


def _annotation_paths(sources: list[str]) -> list[Path]:
    paths: list[Path] = []
    for source in sources:
        path = Path(source)
        if path.is_dir():
            paths.extend(sorted(path.glob("*.json")))
        else:
            paths.append(path)
    return paths


def _generated_texts(output_dir: Path | None) -> dict[tuple[str, int], str] | None:
    if output_dir is None:
        return None
    ledger_path = Path(output_dir) / "runs.jsonl"
    if not ledger_path.exists():
        return None
    texts: dict[tuple[str, int], str] = {}
    for record in load_ledger(ledger_path).records:
        if record.error is None:
            texts[(record.consultation_id, record.run_index)] = record.response_text
    return texts


def _render_error_tally(errors_tally) -> list[str]:
    lines = []
    class_order = ("Factual", "Stylistic", "Omissions", "Redundant")
    leaf_labels = {
        "hallucination": "Hallucinations",
        "incorrect_statement": "Incorrect statements",
        "repetition": "Repetitions",
        "classification_error": "Classification errors",
    }
    for error_class in class_order:
        total = errors_tally.class_totals.get(error_class, 0)
        lines.append(f"{error_class}: {total}")
        for (category, section), count in sorted(errors_tally.leaf_counts.items()):
            if ERROR_CLASSES[category] != error_class:
                continue
            label = leaf_labels.get(category, f"In {section}")
            lines.append(f"  {label}: {count}")
    lines.append(f"Total: {errors_tally.total}")
    return lines


def cmd_tally(args) -> int:
    paths = _annotation_paths(args.files)
    if not paths:
        return _fail("no annotation files given")
    sets = [load_annotation_file(path) for path in paths]
    merged = merge_sets(sets)
    errors_tally = tally_errors(merged.annotations)
    generated = _generated_texts(Path(args.output) if args.output else None)
    payload = {
        "errors": {
            "leaf_counts": {
                f"{category}:{section}" if section else category: count
                for (category, section), count in sorted(errors_tally.leaf_counts.items())
            },
            "class_totals": dict(sorted(errors_tally.class_totals.items())),
            "total": errors_tally.total,
        },
        "relevance": {
            category: {
                "relevant": summary.relevant,
                "neutral": summary.neutral,
                "not_relevant": summary.not_relevant,
                "consensus": summary.consensus,
            }
            for category, summary in tally_relevance(merged.votes).items()
        },
    }
    if generated is not None:
        payload["word_categories"] = tally_word_categories(merged.word_tags, generated)
    if args.json:
        print(json.dumps(payload, indent=2, ensure_ascii=False, sort_keys=True))
        return 0
    for line in _render_error_tally(errors_tally):
        print(line)
    if generated is not None:
        print("Word categories (tokens):")
        for category, count in payload["word_categories"].items():
            print(f"  {category}: {count}")
    if payload["relevance"]:
        print("Relevance votes:")
        for category, summary in payload["relevance"].items():
            print(
                f"  {category}: relevant {summary['relevant']}, neutral "
                f"{summary['neutral']}, not relevant {summary['not_relevant']} "
                f"({summary['consensus']})"
            )
    return 0


def _word_count_section(ledger, corpus, variant_id: str | None) -> list[str]:
    usable = [r for r in ledger.records if r.error is None]
    if not usable:
        return ["no successful runs in ledger"]
    variants = sorted({r.variant_id for r in usable})
    if variant_id is None:
        variant_id = "two-shot+a+b+c+d" if "two-shot+a+b+c+d" in variants else variants[-1]
    rows = [r for r in usable if r.variant_id == variant_id]
    lines = [f"Word counts, variant {variant_id} (mean over runs):", ""]
    lines.append(f"{'Consultation':<14}{'Section':<12}{'Reference':>10}"
                 f"{'Generated':>11}{'Difference':>12}")
    for reference in corpus.references:
        runs = [r for r in rows if r.consultation_id == reference.id]
        if not runs:
            continue
        parsed = []
        for record in runs:
            try:
                parsed.append(parse_soap(record.response_text))
            except NoSectionsFound:
                continue
        if not parsed:
            lines.append(f"{reference.id:<14}(no parseable generated reports)")
            continue
        ref_counts, totals = None, [0.0] * 5
        for report in parsed:
            gen, ref_counts, _ = section_word_counts(report, reference.report)
            for index, name in enumerate(SECTION_FIELDS + ("total",)):
                totals[index] += getattr(gen, name)
        means = [value / len(parsed) for value in totals]
        for index, name in enumerate(SECTION_FIELDS + ("total",)):
            ref_value = getattr(ref_counts, name)
            lines.append(
                f"{reference.id if index == 0 else '':<14}{name:<12}"
                f"{ref_value:>10}{means[index]:>11.1f}{means[index] - ref_value:>12.1f}"
            )
    return lines


def cmd_report(args) -> int:
    output_dir = Path(args.output)
    ledger_path = output_dir / "runs.jsonl"
    if not ledger_path.exists():
        return _fail(f"no ledger at {ledger_path}")
    ledger = load_ledger(ledger_path)
    corpus = load_corpus(args.corpus)
    sections = []
    wanted = args.section

    if wanted in ("all", "wordcount"):
        sections.append("\n".join(_word_count_section(ledger, corpus, args.variant)))
    if wanted in ("all", "scores"):
        sections.append(render_table(aggregate(ledger)))
    if wanted in ("all", "errors", "relevance"):
        paths = _annotation_paths(args.annotations) if args.annotations else []
        if not paths:
            sections.append("no annotations")
        else:
            merged = merge_sets([load_annotation_file(path) for path in paths])
            if wanted in ("all", "errors"):
                sections.append("\n".join(_render_error_tally(tally_errors(merged.annotations))))
            if wanted in ("all", "relevance"):
                lines = ["Relevance votes:"]
                for category, summary in tally_relevance(merged.votes).items():
                    lines.append(
                        f"  {category}: relevant {summary.relevant}, neutral "
                        f"{summary.neutral}, not relevant {summary.not_relevant} "
                        f"({summary.consensus})"
                    )
                sections.append("\n".join(lines))
    print(("\n\n" + "=" * 60 + "\n\n").join(sections))
    return 0


def cmd_serve(args) -> int:
    context = build_context(
        output_dir=Path(args.output),
        corpus_root=Path(args.corpus),
        variant=args.variant,
        annotations_dir=args.annotations_dir,
        assets_dir=args.assets,
    )
    server = make_server(context, bind=args.bind, port=args.port)
    host, port = server.server_address[:2]
    print(f"serving annotator on http://{host}:{port}/ (variant {context.variant_id})",
          flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="soapbench",
        description="Prompt-engineering harness for automated SOAP reporting.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    corpus_parser = sub.add_parser("corpus", help="corpus inspection")
    corpus_sub = corpus_parser.add_subparsers(dest="corpus_command", required=True)
    stats = corpus_sub.add_parser("stats", help="word-count statistics")
    stats.add_argument("--corpus", required=True, help="corpus directory")
    stats.add_argument("--shuffle-split", type=int, metavar="SEED",
                       help="re-partition inputs/shots deterministically before stats")
    stats.add_argument("--json", action="store_true", help="machine-readable output")
    stats.set_defaults(func=cmd_corpus_stats)

    prompt_parser = sub.add_parser("prompt", help="prompt matrix and rendering")
    prompt_sub = prompt_parser.add_subparsers(dest="prompt_command", required=True)
    matrix = prompt_sub.add_parser("matrix", help="list variant ids")
    matrix.add_argument("--pack", help="prompt-pack JSON file")
    matrix.set_defaults(func=cmd_prompt_matrix)
    render = prompt_sub.add_parser("render", help="render one variant against a transcript")
    render.add_argument("--variant", required=True)
    render.add_argument("--transcript", required=True, help="consultation id")
    render.add_argument("--corpus", required=True)
    render.add_argument("--pack")
    render.add_argument("--json", action="store_true")
    render.set_defaults(func=cmd_prompt_render)

    run = sub.add_parser(
        "run",
        help="execute the experiment and aggregate",
        epilog=(
            "config file keys (flat `key = value`, flags win): corpus_root, "
            "prompt_pack, output_dir, variants, repeats, model, temperature, "
            "backend, mock_seed, endpoint, credential, timeout, max_attempts, "
            "base_backoff, concurrency, keep_punctuation, shuffle_split. "
            "Relative paths resolve against the config file's directory."
        ),
    )
    run.add_argument("--config", help="key = value config file")
    run.add_argument("--corpus", help="override corpus_root")
    run.add_argument("--output", help="override output_dir")
    run.add_argument("--pack", help="override prompt_pack")
    run.add_argument("--backend", choices=["mock", "remote"], help="override backend")
    run.add_argument("--variants", help="comma-separated variant ids or 'all'")
    run.add_argument("--repeats", type=int, help="runs per variant x transcript")
    run.add_argument("--mock-seed", type=int, help="seed for the mock backend")
    run.add_argument("--shuffle-split", type=int, metavar="SEED",
                     help="re-partition inputs/shots deterministically before running")
    run.set_defaults(func=cmd_run)

    agg = sub.add_parser("aggregate", help="recompute aggregates from an existing ledger")
    agg.add_argument("--output", required=True, help="output dir containing runs.jsonl")
    agg.set_defaults(func=cmd_aggregate)

    score = sub.add_parser("score", help="ROUGE-score a candidate file against a reference")
    score.add_argument("candidate")
    score.add_argument("reference")
    score.add_argument("--keep-punctuation", action="store_true")
    score.set_defaults(func=cmd_score)

    tally_parser = sub.add_parser("tally", help="tally annotation files")
    tally_parser.add_argument("files", nargs="+", help="annotation JSON files or directories")
    tally_parser.add_argument("--output", help="output dir with runs.jsonl for word counts")
    tally_parser.add_argument("--json", action="store_true")
    tally_parser.set_defaults(func=cmd_tally)

    report = sub.add_parser("report", help="combined study report")
    report.add_argument("--output", required=True, help="output dir with runs.jsonl")
    report.add_argument("--corpus", required=True)
    report.add_argument("--annotations", nargs="*", help="annotation files or directories")
    report.add_argument("--variant", help="variant for the word-count section")
    report.add_argument("--section", choices=["all", "wordcount", "scores", "errors",
                                              "relevance"], default="all")
    report.set_defaults(func=cmd_report)

    serve = sub.add_parser("serve", help="serve the annotator UI and JSON API")
    serve.add_argument("--output", required=True, help="output dir with runs.jsonl")
    serve.add_argument("--corpus", required=True)
    serve.add_argument("--variant", help="whose generated reports to annotate")
    serve.add_argument("--annotations-dir", help="where annotation files are written")
    serve.add_argument("--assets", help="static asset directory (annotator UI build)")
    serve.add_argument("--bind", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8011)
    serve.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UnknownVariant as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SoapBenchError as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    raise SystemExit(main())
