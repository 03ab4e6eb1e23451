import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path
from typing import Callable, Optional, Sequence

import pandas as pd
from rich_argparse import RichHelpFormatter

import Corpus
import Experiments
import PromptBuilder
import ReportWriter
from EntityMetrics import BackendUnavailable, DEFAULT_WINDOW, GazetteerBackend, HttpNerBackend, MATCHINGS, NerBackend
from LlmClient import BUILTIN_PROVIDERS, Provider, ProviderError, RecordingProvider, build_provider
from TextMetrics import NormalizationPolicy
from printer import Printer

printer = Printer.getInstance()

DEFAULT_PROMPTS = "full-context,expert-recover-instructions"
TRUE_VALUES = ("1", "true", "yes", "on")
FALSE_VALUES = ("0", "false", "no", "off", "")


class UsageError(Exception):
    pass


class ClocrcArgumentParser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(f"{message}\n{self.format_usage()}")


def csv_list(value: str) -> list[str]:
    return [item.strip() for item in value.split(",") if item.strip() != ""]


def int_list(value: str) -> list[int]:
    try:
        return [int(item) for item in csv_list(value)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"'{value}' is not a comma-separated list of integers")


def read_config_file(path: str | Path) -> dict[str, str]:
    """
    Reads a flat 'key=value' file ('#' comments, blank lines ignored). Values may reference environment variables
    as $VAR or ${VAR}. Keys are flag names with or without leading dashes.
    """
    config = {}
    with open(path, encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            line = line.strip()
            if line == "" or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"Line {line_number} of config file '{path}' is not of the form 'key=value'")
            key, value = line.split("=", 1)
            value = os.path.expandvars(value.strip())
            if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
                value = value[1:-1]
            config[key.strip().lstrip("-")] = value
    return config


def _apply_config(parser: argparse.ArgumentParser, config: dict[str, str], used: set[str]) -> None:
    defaults = {}
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            for subparser in action.choices.values():
                _apply_config(subparser, config, used)
            continue
        if action.dest not in config:
            continue
        value = config[action.dest]
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            if value.lower() not in TRUE_VALUES + FALSE_VALUES:
                raise ValueError(f"Config value '{value}' of '{action.dest}' is not a boolean")
            value = value.lower() in TRUE_VALUES
        defaults[action.dest] = value
        used.add(action.dest)
    if len(defaults) > 0:
        parser.set_defaults(**defaults)


def _add_provider_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--provider", type=str, default="echo", choices=sorted(BUILTIN_PROVIDERS), help="Provider to send requests to (default: echo)")
    parser.add_argument("--model", type=csv_list, default=None, help="Model id(s), comma-separated (default: the provider name for echo/replay)")
    parser.add_argument("--fixtures", type=str, default=None, help="Replay fixture JSONL for the replay provider")
    parser.add_argument("--baseUrl", "--base-url", type=str, default=None, help="Override the provider endpoint")
    parser.add_argument("--concurrency", type=int, default=None, help="Maximum concurrent requests to the provider")
    parser.add_argument("--maxAttempts", "--max-attempts", type=int, default=5, help="Attempts per request for transient failures (default: 5)")
    parser.add_argument("--timeout", type=float, default=120.0, help="Request timeout in seconds (default: 120)")


def _add_scoring_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--unicodeForm", "--unicode-form", type=str, default="NFC", choices=["NFC", "none"], help="Unicode normalization before scoring (default: NFC)")
    parser.add_argument("--keepWhitespace", "--keep-whitespace", action="store_true", help="Do not collapse whitespace runs before scoring")
    parser.add_argument("--caseFold", "--case-fold", action="store_true", help="Score case-insensitively")
    parser.add_argument("--gazetteer", type=str, default=None, help="Gazetteer lexicon ('surface<TAB>type' per line) for CoNES and F1")
    parser.add_argument("--nerEndpoint", "--ner-endpoint", type=str, default=None, help="URL of a NER service for CoNES and F1")
    parser.add_argument("--nerTimeout", "--ner-timeout", type=float, default=30.0, help="Timeout of the NER service in seconds (default: 30)")
    parser.add_argument("--window", type=int, default=DEFAULT_WINDOW, help=f"Allowed offset difference of the windowed entity F1 (default: {DEFAULT_WINDOW})")
    parser.add_argument("--conesIgnoreType", "--cones-ignore-type", action="store_true", help="Compare entities by surface only")
    parser.add_argument("--matching", type=str, default="greedy", choices=list(MATCHINGS), help="Pairing of entity mentions for the windowed F1 (default: greedy)")


def build_parser() -> ClocrcArgumentParser:
    common = ClocrcArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="Flat key=value config file, flags override it")
    common.add_argument("--logFile", "--log-file", type=str, default=None, help="Append all diagnostics to this file")
    common.add_argument("--dryRun", "--dry-run", action="store_true", help="Print the resolved plan without writing results or calling providers")

    parser = ClocrcArgumentParser(prog="clocrc", description="Evaluation harness for LLM-based OCR correction", formatter_class=RichHelpFormatter)
    commands = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add(subparsers, name: str, help_text: str, handler: Optional[Callable] = None) -> argparse.ArgumentParser:
        sub = subparsers.add_parser(name, help=help_text, description=help_text, parents=[common] if handler is not None else [], formatter_class=RichHelpFormatter)
        if handler is not None:
            sub.set_defaults(handler=handler)
        return sub

    corpus = add(commands, "corpus", "Import and filter corpora").add_subparsers(dest="action", required=True, metavar="action")
    sub = add(corpus, "import", "Convert a corpus to the JSONL corpus format", cmd_corpus_import)
    sub.add_argument("--format", type=str, required=True, choices=["jsonl", "overproof", "dir"], help="Input format")
    sub.add_argument("--input", type=str, required=True, help="Input file (jsonl, overproof) or directory (dir)")
    sub.add_argument("--output", type=str, required=True, help="Target JSONL corpus")
    sub.add_argument("--dataset", type=str, default=None, help="Dataset name (default: SMH for overproof, custom otherwise)")

    sub = add(corpus, "filter", "Apply the token and symbol-ratio sampling heuristics", cmd_corpus_filter)
    sub.add_argument("--corpus", type=str, default=None, help="JSONL corpus whose articles are filtered")
    sub.add_argument("--output", type=str, default=None, help="Target JSONL of the retained articles")
    sub.add_argument("--minArticleTokens", "--min-article-tokens", type=int, default=Corpus.MIN_ARTICLE_TOKENS, help="Minimum OCR tokens per article (default: 100)")
    sub.add_argument("--pages", type=str, default=None, help="Pages JSONL {periodical, text} to filter")
    sub.add_argument("--pagesOutput", "--pages-output", type=str, default=None, help="Target JSONL of the retained pages")
    sub.add_argument("--minPageTokens", "--min-page-tokens", type=int, default=Corpus.MIN_PAGE_TOKENS, help="Minimum tokens per page (default: 500)")
    sub.add_argument("--dropTopRatio", "--drop-top-ratio", type=float, default=Corpus.DROP_TOP_RATIO, help="Share of highest symbol ratios dropped per periodical (default: 0.10)")
    sub.add_argument("--symbolSet", "--symbol-set", type=str, default=Corpus.DEFAULT_SYMBOLS, help="Characters counted as noise symbols")

    prompts = add(commands, "prompts", "Prompt catalogue").add_subparsers(dest="action", required=True, metavar="action")
    sub = add(prompts, "export", "Write the prompt catalogue as JSON", cmd_prompts_export)
    sub.add_argument("--output", type=str, default=None, help="Target file (default: standard output)")

    sub = add(commands, "correct", "Correct a corpus with language models and score the corrections", cmd_correct)
    sub.add_argument("--corpus", type=str, required=True, help="JSONL corpus")
    sub.add_argument("--output", type=str, required=True, help="Results JSONL (appended, reruns skip finished cells)")
    sub.add_argument("--prompts", type=csv_list, default=csv_list(DEFAULT_PROMPTS), help=f"Prompt labels, comma-separated (default: {DEFAULT_PROMPTS})")
    sub.add_argument("--placements", type=csv_list, default=["text_suffix"], help="system_message and/or text_suffix, comma-separated (default: text_suffix)")
    sub.add_argument("--temperature", type=float, default=0.0, help="Sampling temperature (default: 0)")
    sub.add_argument("--maxOutputTokens", "--max-output-tokens", type=int, default=4096, help="Maximum response tokens (default: 4096)")
    sub.add_argument("--logprobs", action="store_true", help="Request token log probabilities (perplexity)")
    sub.add_argument("--seed", type=int, default=0, help="Request seed where supported (default: 0)")
    sub.add_argument("--stripCommentary", "--strip-commentary", action="store_true", help="Remove a leading commentary line from responses")
    sub.add_argument("--commentaryPattern", "--commentary-pattern", type=str, default=None, help="Regular expression of a commentary line")
    sub.add_argument("--recordFixtures", "--record-fixtures", type=str, default=None, help="Write every response as a replay fixture to this JSONL")
    _add_provider_arguments(sub)
    _add_scoring_arguments(sub)

    sub = add(commands, "evaluate", "Score ready-made hypotheses against the transcriptions", cmd_evaluate)
    sub.add_argument("--corpus", type=str, required=True, help="JSONL corpus")
    group = sub.add_mutually_exclusive_group(required=True)
    group.add_argument("--hypothesisFrom", "--hypothesis-from", type=str, choices=["gt", "ocr", "baseline"], help="Score a text stored in the corpus")
    group.add_argument("--hypotheses", type=str, help="JSONL with {id, text} per document")
    sub.add_argument("--label", type=str, default=None, help="Name of the hypotheses in the results")
    sub.add_argument("--output", type=str, default=None, help="Also write the per-document rows as results JSONL")
    sub.add_argument("--aggregation", type=str, default="median", choices=["median", "mean"], help="Aggregation of per-document values (default: median)")
    _add_scoring_arguments(sub)

    sub = add(commands, "report", "Summarize a results file", cmd_report)
    sub.add_argument("--results", type=str, required=True, help="Results JSONL")
    sub.add_argument("--aggregation", type=str, default="median", choices=["median", "mean", "both"], help="Aggregation of per-document values (default: median)")
    sub.add_argument("--format", type=str, default="markdown", choices=["markdown", "csv", "xlsx"], help="Report format (default: markdown)")
    sub.add_argument("--output", type=str, default=None, help="Target file (default: standard output, required for xlsx)")
    sub.add_argument("--comparePrompts", "--compare-prompts", type=csv_list, default=None, help="Two prompt labels A,B for a difference table")

    experiment = add(commands, "experiment", "Socio-cultural context experiments").add_subparsers(dest="action", required=True, metavar="action")
    sub = add(experiment, "joke", "Recover corrupted joke phrases under three prompts", cmd_experiment_joke)
    sub.add_argument("--repetitions", type=int, default=Experiments.JOKE_REPETITIONS, help="Requests per cell (default: 100)")
    sub.add_argument("--temperature", type=float, default=Experiments.JOKE_TEMPERATURE, help="Sampling temperature (default: 0.8)")
    sub.add_argument("--seed", type=int, default=0, help="Seed of the first request (default: 0)")
    sub.add_argument("--match", type=str, default="exact", choices=["exact", "contains"], help="Correctness criterion (default: exact)")
    sub.add_argument("--placement", type=str, default="system_message", choices=list(PromptBuilder.PLACEMENTS), help="Prompt placement (default: system_message)")
    sub.add_argument("--output", type=str, default=None, help="Write the grid as CSV")
    _add_provider_arguments(sub)

    sub = add(experiment, "chunks", "Correct long articles in blocks of lines", cmd_experiment_chunks)
    sub.add_argument("--corpus", type=str, required=True, help="Line-aligned JSONL corpus")
    sub.add_argument("--blockSizes", "--block-sizes", type=int_list, default=list(Corpus.VALID_BLOCK_SIZES), help="Block sizes, comma-separated (default: 2,5,10,15,30,60)")
    sub.add_argument("--prompts", type=csv_list, default=list(Experiments.TASK_LENGTH_PROMPTS), help="basic, socio and/or mislead (default: all)")
    sub.add_argument("--placement", type=str, default="text_suffix", choices=list(PromptBuilder.PLACEMENTS), help="Prompt placement (default: text_suffix)")
    sub.add_argument("--temperature", type=float, default=0.0, help="Sampling temperature (default: 0)")
    sub.add_argument("--aggregation", type=str, default="median", choices=["median", "mean"], help="Aggregation of per-document CER (default: median)")
    sub.add_argument("--output", type=str, default=None, help="Write the table as CSV")
    sub.add_argument("--chunksOutput", "--chunks-output", type=str, default=None, help="Write per-chunk CER as CSV")
    _add_provider_arguments(sub)

    stats = add(commands, "stats", "Significance tests").add_subparsers(dest="action", required=True, metavar="action")
    sub = add(stats, "bootstrap", "Bootstrapped t-test between two groups of per-document values", cmd_stats_bootstrap)
    sub.add_argument("--results", type=str, default=None, help="Results JSONL to draw the samples from")
    sub.add_argument("--field", type=str, default="placement", choices=["placement", "prompt_label", "model_id", "dataset"], help="Column separating the groups (default: placement)")
    sub.add_argument("--a", type=str, default=None, help="Value of the first group")
    sub.add_argument("--b", type=str, default=None, help="Value of the second group")
    sub.add_argument("--metric", type=str, default="erp", choices=["erp", "cer_corrected", "cones", "f1"], help="Per-document metric (default: erp)")
    sub.add_argument("--sampleA", "--sample-a", type=str, default=None, help="Text file with one value per line (instead of --results)")
    sub.add_argument("--sampleB", "--sample-b", type=str, default=None, help="Text file with one value per line (instead of --results)")
    sub.add_argument("--resamples", type=int, default=Experiments.DEFAULT_RESAMPLES, help="Bootstrap resamples (default: 10000)")
    sub.add_argument("--seed", type=int, default=0, help="Resampling seed (default: 0)")
    return parser


def parse_arguments(argv: Sequence[str]) -> argparse.Namespace:
    parser = build_parser()
    pre = ClocrcArgumentParser(add_help=False)
    pre.add_argument("--config", type=str, default=None)
    known, _ = pre.parse_known_args(argv)
    if known.config is not None:
        config = read_config_file(known.config)
        used = set()
        _apply_config(parser, config, used)
        for key in sorted(set(config) - used):
            printer.warning(f"Unknown key '{key}' in config file '{known.config}' - ignoring")
    return parser.parse_args(argv)


def _policy(args: argparse.Namespace) -> NormalizationPolicy:
    return NormalizationPolicy(unicode_form=args.unicodeForm, collapse_whitespace=not args.keepWhitespace, case_fold=args.caseFold)


def _ner_backend(args: argparse.Namespace) -> Optional[NerBackend]:
    if args.gazetteer is not None and args.nerEndpoint is not None:
        raise ValueError("Please use either --gazetteer or --nerEndpoint, not both")
    if args.gazetteer is not None:
        return GazetteerBackend.from_file(args.gazetteer)
    if args.nerEndpoint is not None:
        return HttpNerBackend(args.nerEndpoint, args.nerTimeout)
    return None


def _models(args: argparse.Namespace) -> list[str]:
    if args.model is not None and len(args.model) > 0:
        return args.model
    if args.provider in ("echo", "replay"):
        return [args.provider]
    raise ValueError(f"Provider '{args.provider}' needs a model id. Please set --model.")


def _provider(args: argparse.Namespace) -> Provider:
    config = dataclasses.replace(BUILTIN_PROVIDERS[args.provider], max_attempts=args.maxAttempts, timeout=args.timeout,
                                 fixture_path=args.fixtures if args.fixtures is not None else BUILTIN_PROVIDERS[args.provider].fixture_path)
    if args.baseUrl is not None:
        config = dataclasses.replace(config, base_url=args.baseUrl)
    if args.concurrency is not None:
        config = dataclasses.replace(config, max_concurrency=args.concurrency)
    return build_provider(config)


def _write_stdout(text: str) -> None:
    sys.stdout.write(text)
    sys.stdout.flush()


def cmd_corpus_import(args: argparse.Namespace) -> int:
    match args.format:
        case "jsonl":
            documents = Corpus.load_corpus(args.input)
            if args.dataset is not None:
                documents = [dataclasses.replace(doc, dataset=args.dataset) for doc in documents]
        case "overproof":
            documents = Corpus.import_overproof(args.input, args.dataset or "SMH")
        case "dir":
            documents = Corpus.import_directory(args.input, args.dataset or "custom")
        case _:
            raise ValueError(f"Unknown corpus format '{args.format}'")
    if args.dataset is not None and args.dataset not in Corpus.KNOWN_DATASETS:
        printer.warning(f"Dataset '{args.dataset}' is not one of the known datasets {Corpus.KNOWN_DATASETS}")
    printer.information(f"Read {len(documents)} documents from '{args.input}'")
    if args.dryRun:
        _write_stdout(ReportWriter.format_markdown(Corpus.corpus_overview(documents)))
        return 0
    Corpus.write_corpus(documents, args.output)
    printer.success(f"Wrote {len(documents)} documents to '{args.output}'")
    return 0


def cmd_corpus_filter(args: argparse.Namespace) -> int:
    if args.corpus is None and args.pages is None:
        raise ValueError("Nothing to filter. Please set --corpus and/or --pages.")
    if args.corpus is not None:
        documents = Corpus.load_corpus(args.corpus)
        retained = Corpus.filter_articles(documents, args.minArticleTokens)
        printer.information(f"Articles: {len(retained)} of {len(documents)} have at least {args.minArticleTokens} tokens")
        if not args.dryRun:
            if args.output is None:
                raise ValueError("Please set --output for the retained articles")
            Corpus.write_corpus(retained, args.output)
    if args.pages is not None:
        pages = Corpus.load_pages(args.pages)
        retained_pages = Corpus.filter_pages(pages, args.minPageTokens, args.dropTopRatio, args.symbolSet)
        printer.information(f"Pages: {len(retained_pages)} of {len(pages)} retained")
        if not args.dryRun:
            if args.pagesOutput is None:
                raise ValueError("Please set --pagesOutput for the retained pages")
            with open(args.pagesOutput, "w", encoding="utf-8", newline="\n") as f:
                for periodical, text in retained_pages:
                    f.write(json.dumps({"periodical": periodical, "text": text}, ensure_ascii=False) + "\n")
    return 0


def cmd_prompts_export(args: argparse.Namespace) -> int:
    if args.dryRun or args.output is None:
        _write_stdout(PromptBuilder.export_catalogue())
        return 0
    PromptBuilder.export_catalogue(args.output)
    printer.success(f"Prompt catalogue written to '{args.output}'")
    return 0


def cmd_correct(args: argparse.Namespace) -> int:
    documents = Corpus.load_corpus(args.corpus)
    config = Experiments.RunConfig(models=[(args.provider, model) for model in _models(args)],
                                   prompt_labels=[PromptBuilder.parse_label(label) for label in args.prompts], placements=args.placements,
                                   output_path=args.output, seed=args.seed, temperature=args.temperature, max_output_tokens=args.maxOutputTokens,
                                   want_logprobs=args.logprobs, strip_commentary=args.stripCommentary, window=args.window,
                                   cones_ignore_type=args.conesIgnoreType, matching=args.matching, policy=_policy(args))
    if args.commentaryPattern is not None:
        config.commentary_pattern = args.commentaryPattern
    if args.dryRun:
        outcome = Experiments.run_corrections(documents, config, {}, dry_run=True)
        _write_stdout(f"cells: {outcome.planned}\nalready done: {outcome.skipped}\npending: {outcome.planned - outcome.skipped}\n")
        return 0
    provider = _provider(args)
    if provider.is_live:
        printer.information(f"Requests go to the live provider '{provider.config.name}' at {provider.config.base_url}")
    if args.recordFixtures is not None:
        if not provider.is_live:
            printer.warning(f"Recording fixtures of the offline provider '{args.provider}'")
        provider = RecordingProvider(provider)
    try:
        outcome = Experiments.run_corrections(documents, config, {args.provider: provider}, _ner_backend(args))
    finally:
        if isinstance(provider, RecordingProvider):
            count = provider.save(args.recordFixtures)
            printer.success(f"Recorded {count} fixture(s) in '{args.recordFixtures}'")
    if outcome.failed > 0:
        printer.warning(f"{outcome.failed} cell(s) failed; rerun the same command to retry them")
    return 0


def _hypotheses(args: argparse.Namespace, documents: list[Corpus.DocumentPair]) -> tuple[dict[str, str], str]:
    if args.hypotheses is not None:
        hypotheses = {}
        with open(args.hypotheses, encoding="utf-8") as f:
            for line_number, line in enumerate(f, start=1):
                if line.strip() == "":
                    continue
                try:
                    record = json.loads(line)
                    hypotheses[str(record["id"])] = str(record["text"])
                except (json.JSONDecodeError, KeyError, TypeError) as e:
                    raise ValueError(f"Line {line_number} of '{args.hypotheses}' is not an object {{id, text}}") from e
        return hypotheses, args.label or Path(args.hypotheses).stem
    match args.hypothesisFrom:
        case "gt":
            return {doc.id: doc.gt_text for doc in documents}, args.label or "transcription"
        case "ocr":
            return {doc.id: doc.ocr_text for doc in documents}, args.label or "Original"
        case _:
            return {doc.id: doc.baseline_text for doc in documents if doc.baseline_text is not None}, args.label or "baseline"


def cmd_evaluate(args: argparse.Namespace) -> int:
    documents = Corpus.load_corpus(args.corpus)
    hypotheses, label = _hypotheses(args, documents)
    if args.dryRun:
        _write_stdout(f"documents: {len(documents)}\nhypotheses: {len(hypotheses)}\n")
        return 0
    results = Experiments.evaluate_hypotheses(documents, hypotheses, label, _policy(args), _ner_backend(args), args.window, args.conesIgnoreType,
                                              args.matching)
    if args.output is not None:
        with open(args.output, "w", encoding="utf-8", newline="\n") as f:
            for row in results.astype(object).where(results.notna(), None).to_dict(orient="records"):
                f.write(json.dumps(row, ensure_ascii=False) + "\n")
    summary = Experiments.summarize(results, args.aggregation, by=("model_id", "dataset"))
    _write_stdout(ReportWriter.format_markdown(summary, f"{label} ({args.aggregation})"))
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    results = Experiments.load_results(args.results)
    if args.dryRun:
        _write_stdout(f"rows: {len(results)}\nfailed: {int(results['error'].notna().sum())}\n")
        return 0
    if args.aggregation == "both":
        tables = {"Median vs mean": Experiments.summarize_both(results)}
        wide = tables["Median vs mean"]
    else:
        summary = Experiments.summarize(results, args.aggregation)
        wide = Experiments.to_wide_table(summary, Experiments.original_baseline(results, args.aggregation))
        tables = {f"Summary ({args.aggregation})": wide, "Details": summary}
        if args.comparePrompts is not None:
            if len(args.comparePrompts) != 2:
                raise ValueError("--comparePrompts needs exactly two labels A,B")
            prompt_a, prompt_b = (PromptBuilder.parse_label(label) for label in args.comparePrompts)
            tables[f"{prompt_a} vs {prompt_b}"] = Experiments.compare_prompts(summary, prompt_a, prompt_b)

    match args.format:
        case "markdown":
            text = ReportWriter.write_markdown(tables, args.output)
            if args.output is None:
                _write_stdout(text)
        case "csv":
            text = ReportWriter.write_csv(wide, args.output)
            if args.output is None:
                _write_stdout(text)
        case "xlsx":
            if args.output is None:
                raise ValueError("The xlsx report needs --output")
            ReportWriter.write_excel(tables, args.output)
    return 0


def cmd_experiment_joke(args: argparse.Namespace) -> int:
    models = _models(args)
    if args.dryRun:
        jobs = len(Experiments.JOKE_PROMPTS) * len(PromptBuilder.JOKE_PHRASES) * args.repetitions * len(models)
        _write_stdout(f"requests: {jobs}\n")
        return 0
    provider = _provider(args)
    frames = []
    for model in models:
        grid = Experiments.run_joke_grid(provider, model, args.repetitions, args.temperature, args.seed, args.match, args.placement)
        frame = grid.to_frame()
        frame.insert(0, "model_id", model)
        frames.append(frame)
    table = frames[0] if len(frames) == 1 else pd.concat(frames, ignore_index=True)
    if args.output is not None:
        ReportWriter.write_csv(table, args.output, decimals=None)
    _write_stdout(ReportWriter.format_markdown(table, "Joke recovery"))
    return 0


def cmd_experiment_chunks(args: argparse.Namespace) -> int:
    documents = Corpus.load_corpus(args.corpus)
    long_documents = Corpus.select_long_articles(documents, Corpus.CHUNK_TOTAL_LINES)
    models = _models(args)
    if args.dryRun:
        chunks = sum(Corpus.CHUNK_TOTAL_LINES // x for x in args.blockSizes)
        _write_stdout(f"documents: {len(long_documents)} of {len(documents)}\nrequests: {chunks * len(args.prompts) * len(long_documents) * len(models)}\n")
        return 0
    provider = _provider(args)
    for model in models:
        result = Experiments.run_task_length(documents, provider, model, args.blockSizes, args.prompts, args.temperature, args.placement,
                                             args.aggregation)
        table = result.table.reset_index()
        if args.output is not None:
            ReportWriter.write_csv(table, args.output if len(models) == 1 else f"{Path(args.output).with_suffix('')}_{model}.csv")
        if args.chunksOutput is not None:
            ReportWriter.write_csv(result.chunks, args.chunksOutput if len(models) == 1 else f"{Path(args.chunksOutput).with_suffix('')}_{model}.csv")
        _write_stdout(ReportWriter.format_markdown(table, f"CER by block size ({model}, {args.aggregation})"))
    return 0


def _read_sample(path: str) -> list[float]:
    values = []
    with open(path, encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if line.strip() == "":
                continue
            try:
                values.append(float(line))
            except ValueError:
                raise ValueError(f"Line {line_number} of '{path}' is not a number")
    return values


def cmd_stats_bootstrap(args: argparse.Namespace) -> int:
    if args.results is not None:
        if args.a is None or args.b is None:
            raise ValueError("Please set --a and --b to select the two groups")
        sample_a, sample_b = Experiments.paired_samples(Experiments.load_results(args.results), args.field, args.a, args.b, args.metric)
    elif args.sampleA is not None and args.sampleB is not None:
        sample_a, sample_b = _read_sample(args.sampleA), _read_sample(args.sampleB)
    else:
        raise ValueError("Please set --results or both --sampleA and --sampleB")
    printer.information(f"Samples: {len(sample_a)} and {len(sample_b)} values")
    if args.dryRun:
        _write_stdout(f"sample_a: {len(sample_a)}\nsample_b: {len(sample_b)}\nresamples: {args.resamples}\n")
        return 0
    result = Experiments.bootstrap_test(sample_a, sample_b, args.resamples, args.seed)
    _write_stdout(f"statistic: {result.statistic:.6f}\np_value: {result.p_value:.6f}\nresamples: {result.resamples}\n")
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Entry point of the clocrc command.

    :param argv: Arguments without the program name (default: sys.argv[1:])
    :return: 0 on success, 1 on invalid input, 2 if a provider failure aborted the run
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_arguments(argv)
    except UsageError as e:
        printer.error(str(e))
        return 1
    except SystemExit as e:  # --help
        return e.code if isinstance(e.code, int) else 0
    except (ValueError, OSError) as e:
        printer.error(str(e))
        return 1

    printer.set_width(300)
    if args.logFile is not None:
        printer.set_logfile(args.logFile)
    try:
        return args.handler(args)
    except (ProviderError, BackendUnavailable) as e:
        printer.error(f"{type(e).__name__}: {e}")
        return 2
    except (ValueError, OSError) as e:
        printer.error(str(e))
        return 1


if __name__ == "__main__":
    sys.exit(main())
