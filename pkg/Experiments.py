import json
import unicodedata
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Mapping, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import stats

import TextMetrics
from Corpus import DocumentPair, VALID_BLOCK_SIZES, chunk_lines, select_long_articles, truncate_lines, CHUNK_TOTAL_LINES
from EntityMetrics import (BackendAuthError, BackendUnavailable, DEFAULT_WINDOW, EntityMention, MATCHINGS, Matching, NerBackend, build_vectors, cones,
                           extract_corpus_entities, extract_entities, windowed_f1)
from LlmClient import (AuthError, ChatRequest, CompletionJob, CorrectionRecord, DEFAULT_COMMENTARY_PATTERN, DEFAULT_MAX_OUTPUT_TOKENS, Provider,
                       ProviderError, complete, complete_many, perplexity, strip_commentary)
from PromptBuilder import JOKE_PHRASES, PLACEMENTS, Placement, PromptSpec, experiment_prompts, render, render_text
from TextMetrics import AggregationMode, NormalizationPolicy, DEFAULT_POLICY
from printer import Printer

printer = Printer.getInstance()

KEY_COLUMNS = ["doc_id", "model_id", "prompt_label", "placement"]
RESULT_COLUMNS = ["doc_id", "dataset", "model_id", "prompt_label", "placement", "corrected_text", "cer_orig", "cer_corrected", "erp",
                  "cones", "f1", "perplexity", "error", "attempt", "created_at"]
DEFAULT_RESAMPLES = 10_000
JOKE_REPETITIONS = 100
JOKE_TEMPERATURE = 0.8
JOKE_PROMPTS = ("basic", "socio", "mislead")
TASK_LENGTH_PROMPTS = ("basic", "socio", "mislead")


class EmptyResults(ValueError):
    pass


class InsufficientData(ValueError):
    pass


@dataclass
class RunConfig:
    """
    Plan of a correction run: every document is corrected with every (model, prompt, placement) combination.

    :param models: List of (provider name, model id)
    :param prompt_labels: Combined prompt labels
    :param placements: system_message and/or text_suffix
    :param output_path: Results JSONL (appended to, never rewritten)
    """
    models: list[tuple[str, str]]
    prompt_labels: list[str]
    placements: list[str]
    output_path: str
    aggregation: AggregationMode = "median"
    seed: int = 0
    temperature: float = 0.0
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS
    want_logprobs: bool = False
    strip_commentary: bool = False
    commentary_pattern: str = DEFAULT_COMMENTARY_PATTERN
    window: int = DEFAULT_WINDOW
    cones_ignore_type: bool = False
    matching: Matching = "greedy"
    policy: NormalizationPolicy = field(default_factory=lambda: DEFAULT_POLICY)

    def __post_init__(self):
        if len(self.models) == 0 or len(self.prompt_labels) == 0 or len(self.placements) == 0:
            raise ValueError("A run needs at least one model, one prompt label and one placement")
        for placement in self.placements:
            if placement not in PLACEMENTS:
                raise ValueError(f"Unknown placement '{placement}' - please use one of {PLACEMENTS}")
        if self.aggregation not in TextMetrics.AGGREGATION_MODES:
            raise ValueError(f"Unknown aggregation '{self.aggregation}' - please use one of {TextMetrics.AGGREGATION_MODES}")
        if self.matching not in MATCHINGS:
            raise ValueError(f"Unknown entity matching '{self.matching}' - please use one of {MATCHINGS}")


@dataclass(frozen=True)
class PlanCell:
    doc: DocumentPair
    provider_name: str
    model_id: str
    spec: PromptSpec

    @property
    def key(self) -> tuple[str, str, str, str]:
        return self.doc.id, self.model_id, self.spec.label, self.spec.placement


def plan_cells(corpus: Sequence[DocumentPair], config: RunConfig) -> list[PlanCell]:
    specs = [PromptSpec.from_label(label, placement) for label in config.prompt_labels for placement in config.placements]
    return [PlanCell(doc, provider_name, model_id, spec) for provider_name, model_id in config.models for spec in specs for doc in corpus]


def build_request(doc: DocumentPair, spec: PromptSpec, model_id: str, config: RunConfig) -> ChatRequest:
    """
    The exact request a plan cell sends (also used to write replay fixtures).
    """
    rendered = render(doc.ocr_text, spec)
    return ChatRequest(user=rendered.user, system=rendered.system, model_id=model_id, temperature=config.temperature,
                       max_output_tokens=config.max_output_tokens, want_logprobs=config.want_logprobs, seed=config.seed, document=doc.ocr_text)


def score_document(doc: DocumentPair, corrected_text: str, policy: NormalizationPolicy = DEFAULT_POLICY, ner_backend: Optional[NerBackend] = None,
                   ref_mentions: Optional[list[EntityMention]] = None, window: int = DEFAULT_WINDOW, ignore_type: bool = False,
                   matching: Matching = "greedy") -> dict:
    """
    Per-document metrics of a corrected text: CER of OCR and correction, ERP (None if the OCR is already perfect)
    and, with a NER backend, CoNES and windowed F1.
    """
    cer_orig = TextMetrics.cer(doc.gt_text, doc.ocr_text, policy)
    cer_corrected = TextMetrics.cer(doc.gt_text, corrected_text, policy)
    scores = {"cer_orig": cer_orig, "cer_corrected": cer_corrected, "erp": TextMetrics.erp(cer_orig, cer_corrected) if cer_orig > 0 else None,
              "cones": None, "f1": None}
    if ner_backend is not None:
        if ref_mentions is None:
            ref_mentions = extract_entities(doc.gt_text, ner_backend) if len(doc.gt_text) > 0 else []
        try:
            pred_mentions = extract_entities(corrected_text, ner_backend) if len(corrected_text) > 0 else []
        except BackendAuthError:
            raise
        except BackendUnavailable as e:
            printer.warning(f"No entity scores for '{doc.id}': {e}")
            return scores
        scores["cones"] = cones(build_vectors(pred_mentions, ref_mentions, ignore_type))
        scores["f1"] = windowed_f1(pred_mentions, ref_mentions, window, ignore_type, matching).f1
    return scores


def _result_row(cell: PlanCell, record: Optional[CorrectionRecord], scores: Optional[dict], error: Optional[str]) -> dict:
    row = dict.fromkeys(RESULT_COLUMNS)
    row.update({"doc_id": cell.doc.id, "dataset": cell.doc.dataset, "model_id": cell.model_id, "prompt_label": cell.spec.label,
                "placement": cell.spec.placement, "error": error})
    if record is not None:
        row.update({"corrected_text": record.corrected_text, "attempt": record.attempt, "created_at": record.created_at})
        if record.token_logprobs is not None and len(record.token_logprobs) > 0:
            row["perplexity"] = perplexity(record.token_logprobs)
    if scores is not None:
        row.update(scores)
    return row


def _process_cell(cell: PlanCell, request: ChatRequest, provider: Provider, config: RunConfig, ner_backend: Optional[NerBackend],
                  ref_mentions: Optional[list[EntityMention]]) -> dict:
    try:
        record = complete(request, provider, cell.doc.id, cell.spec.label, cell.spec.placement)
    except AuthError:
        raise
    except (ProviderError, ValueError) as e:
        return _result_row(cell, None, None, f"{type(e).__name__}: {e}")

    if config.strip_commentary:
        record.corrected_text = strip_commentary(record.corrected_text, config.commentary_pattern)
    try:
        scores = score_document(cell.doc, record.corrected_text, config.policy, ner_backend, ref_mentions, config.window, config.cones_ignore_type,
                               config.matching)
    except ValueError as e:
        return _result_row(cell, record, None, f"{type(e).__name__}: {e}")
    return _result_row(cell, record, scores, None)


def load_results(path: str | Path) -> pd.DataFrame:
    """
    Reads a results JSONL file; when a cell occurs more than once (retried after a failure) the last row wins.
    """
    path = Path(path)
    rows = []
    if path.exists():
        with open(path, encoding="utf-8") as f:
            for line_number, line in enumerate(f, start=1):
                if line.strip() == "":
                    continue
                try:
                    rows.append(json.loads(line))
                except json.JSONDecodeError as e:
                    raise ValueError(f"Line {line_number} of results file '{path}' is not valid JSON: {e.msg}") from e
    df = pd.DataFrame(rows, columns=RESULT_COLUMNS)
    df = df.drop_duplicates(subset=KEY_COLUMNS, keep="last").reset_index(drop=True)
    for column in ["cer_orig", "cer_corrected", "erp", "cones", "f1", "perplexity"]:
        df[column] = pd.to_numeric(df[column], errors="coerce")
    return df


def completed_keys(path: str | Path) -> set[tuple[str, str, str, str]]:
    results = load_results(path)
    done = results[results["error"].isna()]
    return set(done[KEY_COLUMNS].itertuples(index=False, name=None))


@dataclass(frozen=True)
class RunOutcome:
    planned: int
    skipped: int
    completed: int
    failed: int
    output_path: str


def run_corrections(corpus: Sequence[DocumentPair], config: RunConfig, providers: Mapping[str, Provider], ner_backend: Optional[NerBackend] = None,
                    dry_run: bool = False) -> RunOutcome:
    """
    Corrects and scores every pending plan cell and appends one row per cell to the results file.
    Cells already present without error are skipped, so an interrupted run can simply be restarted.
    Rows are written in plan order by this thread only; provider workers hand their finished cells over through futures.

    :param corpus: Documents to correct
    :param config: Run plan
    :param providers: Provider name -> provider
    :param ner_backend: Optional tagger for CoNES and F1
    :param dry_run: Only count the cells, send nothing
    :return: RunOutcome
    """
    cells = plan_cells(corpus, config)
    done = completed_keys(config.output_path)
    pending = [cell for cell in cells if cell.key not in done]
    printer.information(f"Run plan: {len(cells)} cells, {len(cells) - len(pending)} already done, {len(pending)} pending")
    if dry_run or len(pending) == 0:
        return RunOutcome(len(cells), len(cells) - len(pending), 0, 0, config.output_path)
    for provider_name, _ in config.models:
        if provider_name not in providers:
            raise ValueError(f"Provider '{provider_name}' is used in the run but not configured")

    ref_mentions = {}
    if ner_backend is not None:
        pending_docs = {cell.doc.id: cell.doc.gt_text for cell in pending}
        ref_mentions = extract_corpus_entities(pending_docs, ner_backend)

    executors = {name: ThreadPoolExecutor(max_workers=providers[name].config.max_concurrency) for name in {c.provider_name for c in pending}}
    submitted: list[tuple[PlanCell, Optional[Future], Optional[str]]] = []
    completed, failed = 0, 0
    try:
        for cell in pending:
            try:
                request = build_request(cell.doc, cell.spec, cell.model_id, config)
            except ValueError as e:
                submitted.append((cell, None, f"{type(e).__name__}: {e}"))
                continue
            future = executors[cell.provider_name].submit(_process_cell, cell, request, providers[cell.provider_name], config, ner_backend,
                                                          ref_mentions.get(cell.doc.id))
            submitted.append((cell, future, None))

        with open(config.output_path, "a", encoding="utf-8", newline="\n") as f:
            for cell, future, request_error in submitted:
                row = _result_row(cell, None, None, request_error) if future is None else future.result()
                f.write(json.dumps(row, ensure_ascii=False) + "\n")
                f.flush()
                if row["error"] is None:
                    completed += 1
                else:
                    failed += 1
                    printer.warning(f"Cell {cell.key} failed: {row['error']}")
    except AuthError as e:
        printer.error(str(e))
        for _, future, _ in submitted:
            if future is not None:
                future.cancel()
        raise
    finally:
        for executor in executors.values():
            executor.shutdown(wait=True, cancel_futures=True)

    printer.success(f"Run finished: {completed} cells completed, {failed} failed, results in '{config.output_path}'")
    return RunOutcome(len(cells), len(cells) - len(pending), completed, failed, config.output_path)


def evaluate_hypotheses(corpus: Sequence[DocumentPair], hypotheses: Mapping[str, str], label: str, policy: NormalizationPolicy = DEFAULT_POLICY,
                        ner_backend: Optional[NerBackend] = None, window: int = DEFAULT_WINDOW, ignore_type: bool = False,
                        matching: Matching = "greedy") -> pd.DataFrame:
    """
    Scores ready-made hypotheses (e.g. the transcription itself, the raw OCR or a third-party correction) in the results row format.

    :param hypotheses: Document id -> hypothesis text
    :param label: Stored as model_id of the rows
    """
    rows = []
    for doc in corpus:
        if doc.id not in hypotheses:
            printer.warning(f"No hypothesis for document '{doc.id}' - skipping")
            continue
        row = dict.fromkeys(RESULT_COLUMNS)
        row.update({"doc_id": doc.id, "dataset": doc.dataset, "model_id": label, "prompt_label": "-", "placement": "-",
                    "corrected_text": hypotheses[doc.id]})
        try:
            row.update(score_document(doc, hypotheses[doc.id], policy, ner_backend, None, window, ignore_type, matching))
        except ValueError as e:
            row["error"] = f"{type(e).__name__}: {e}"
        rows.append(row)
    df = pd.DataFrame(rows, columns=RESULT_COLUMNS)
    for column in ["cer_orig", "cer_corrected", "erp", "cones", "f1", "perplexity"]:
        df[column] = pd.to_numeric(df[column], errors="coerce")
    return df


def _aggregate_or_nan(values: pd.Series, mode: AggregationMode) -> float:
    values = values.dropna()
    return TextMetrics.aggregate(values.to_list(), mode) if len(values) > 0 else np.nan


def summarize(results: pd.DataFrame, aggregation: AggregationMode = "median",
              by: Sequence[str] = ("model_id", "dataset", "prompt_label", "placement")) -> pd.DataFrame:
    """
    Aggregates per-document results per cell. ERP is aggregated over the per-document ERPs, never recomputed from
    aggregated CERs; documents whose OCR is already perfect have no ERP and are counted in n_zero_original.
    Values are unrounded, rounding is left to the report.

    :param results: Results frame (see load_results)
    :param aggregation: "median" or "mean"
    :param by: Grouping columns
    :return: One row per group with cer_orig, cer, erp, share_improved, cones, f1, perplexity and counts
    """
    if len(results) == 0:
        raise EmptyResults("There are no results to summarize. Please check the results file.")
    rows = []
    for keys, group in results.groupby(list(by), sort=True, dropna=False):
        ok = group[group["error"].isna()]
        erps = ok["erp"].dropna()
        row = dict(zip(by, keys if isinstance(keys, tuple) else (keys,)))
        row.update({
            "cer_orig": _aggregate_or_nan(ok["cer_orig"], aggregation),
            "cer": _aggregate_or_nan(ok["cer_corrected"], aggregation),
            "erp": _aggregate_or_nan(erps, aggregation),
            "share_improved": float((erps > 0).mean()) if len(erps) > 0 else np.nan,
            "cones": _aggregate_or_nan(ok["cones"], aggregation),
            "f1": _aggregate_or_nan(ok["f1"], aggregation),
            "perplexity": _aggregate_or_nan(ok["perplexity"], aggregation),
            "n_documents": len(ok),
            "n_zero_original": int(ok["erp"].isna().sum()),
            "n_failed": len(group) - len(ok),
        })
        rows.append(row)
    return pd.DataFrame(rows)


def summarize_both(results: pd.DataFrame, by: Sequence[str] = ("model_id", "dataset", "prompt_label", "placement")) -> pd.DataFrame:
    median = summarize(results, "median", by).set_index(list(by))[["cer", "erp"]]
    mean = summarize(results, "mean", by).set_index(list(by))[["cer", "erp"]]
    return median.join(mean, lsuffix="_median", rsuffix="_mean").reset_index()


def original_baseline(results: pd.DataFrame, aggregation: AggregationMode = "median") -> pd.DataFrame:
    """
    CER of the uncorrected OCR per dataset (each document counted once), with ERP 0.
    """
    documents = results.dropna(subset=["cer_orig"]).drop_duplicates(subset=["doc_id", "dataset"])
    rows = [{"model_id": "Original", "dataset": dataset, "cer": TextMetrics.aggregate(group["cer_orig"].to_list(), aggregation), "erp": 0.0}
            for dataset, group in documents.groupby("dataset", sort=True)]
    return pd.DataFrame(rows, columns=["model_id", "dataset", "cer", "erp"])


def to_wide_table(summary: pd.DataFrame, baseline: Optional[pd.DataFrame] = None) -> pd.DataFrame:
    """
    One row per model (and prompt/placement when several were run), columns '<dataset> CER' and '<dataset> ERP'.
    """
    summary = summary.copy()
    index = ["model_id"] + [column for column in ("prompt_label", "placement") if column in summary.columns and summary[column].nunique() > 1]
    if baseline is not None and len(baseline) > 0:
        baseline = baseline.copy()
        for column in index[1:]:
            baseline[column] = "-"
        summary = pd.concat([baseline, summary], ignore_index=True)
    wide = summary.pivot_table(index=index, columns="dataset", values=["cer", "erp"], aggfunc="first", dropna=False, sort=False)
    datasets = sorted(summary["dataset"].unique())
    columns = [(metric, dataset) for dataset in datasets for metric in ("cer", "erp")]
    wide = wide.reindex(columns=columns)
    wide.columns = [f"{dataset} {metric.upper()}" for metric, dataset in columns]
    wide = wide.reset_index().rename(columns={"model_id": "Model", "prompt_label": "Prompt", "placement": "Placement"})
    return wide


def compare_prompts(summary: pd.DataFrame, prompt_a: str, prompt_b: str, metric: str = "erp") -> pd.DataFrame:
    """
    Per model, dataset and placement: the metric under both prompts and their difference (a - b).
    """
    subset = summary[summary["prompt_label"].isin([prompt_a, prompt_b])]
    if len(subset) == 0:
        raise EmptyResults(f"Neither '{prompt_a}' nor '{prompt_b}' occurs in the results")
    table = subset.pivot_table(index=["model_id", "dataset", "placement"], columns="prompt_label", values=metric, aggfunc="first")
    table = table.reindex(columns=[prompt_a, prompt_b])
    table["difference"] = table[prompt_a] - table[prompt_b]
    table.columns.name = None
    return table.reset_index()


def paired_samples(results: pd.DataFrame, column: str, value_a: str, value_b: str, metric: str = "erp") -> tuple[list[float], list[float]]:
    """
    Per-document metric values of the rows where column equals value_a and value_b (failed rows excluded).
    """
    if column not in results.columns or metric not in results.columns:
        raise ValueError(f"Results have no column '{column}' or '{metric}'")
    ok = results[results["error"].isna()]
    sample_a = ok.loc[ok[column] == value_a, metric].dropna().to_list()
    sample_b = ok.loc[ok[column] == value_b, metric].dropna().to_list()
    return sample_a, sample_b


@dataclass(frozen=True)
class SignificanceResult:
    statistic: float
    p_value: float
    resamples: int


def _welch_t(a: np.ndarray, b: np.ndarray, axis: int = -1) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        t = stats.ttest_ind(a, b, axis=axis, equal_var=False).statistic
    return np.nan_to_num(t, nan=0.0)


def bootstrap_test(sample_a: Sequence[float], sample_b: Sequence[float], resamples: int = DEFAULT_RESAMPLES, seed: int = 0) -> SignificanceResult:
    """
    Two-sided bootstrapped t-test of a mean difference. The null distribution of the Welch t statistic is built by
    resampling with replacement from the pooled samples, each centred on its own mean.
    p = (#{|t*| >= |t|} + 1) / (resamples + 1).

    :param sample_a: At least two values
    :param sample_b: At least two values
    :param resamples: Number of bootstrap resamples (>= 1)
    :param seed: Seed of the resampling
    :return: SignificanceResult with the observed t statistic of a against b
    """
    if len(sample_a) < 2 or len(sample_b) < 2:
        raise InsufficientData(f"Both samples need at least two values, got {len(sample_a)} and {len(sample_b)}")
    if resamples < 1:
        raise InsufficientData(f"At least one resample is needed, got {resamples}")

    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    observed = float(_welch_t(a, b))

    # Sorted pool and larger-sample-first draws make the p-value independent of the argument order
    pooled = np.sort(np.concatenate([a - a.mean(), b - b.mean()]))
    n_first, n_second = max(len(a), len(b)), min(len(a), len(b))
    rng = np.random.default_rng(seed)
    first = rng.choice(pooled, size=(resamples, n_first), replace=True)
    second = rng.choice(pooled, size=(resamples, n_second), replace=True)
    null = _welch_t(first, second, axis=1)

    extreme = int(np.count_nonzero(np.abs(null) >= abs(observed) - 1e-12))
    p_value = (extreme + 1) / (resamples + 1)
    return SignificanceResult(statistic=observed, p_value=min(1.0, p_value), resamples=resamples)


def normalize_answer(text: str) -> str:
    text = "".join(char for char in text.casefold() if not unicodedata.category(char).startswith("P"))
    return " ".join(text.split())


def is_correct(response: str, answer: str, mode: Literal["exact", "contains"] = "exact") -> bool:
    match mode:
        case "exact":
            return normalize_answer(response) == normalize_answer(answer)
        case "contains":
            return normalize_answer(answer) in normalize_answer(response)
        case _:
            raise ValueError(f"Unknown match mode '{mode}' - please use 'exact' or 'contains'")


@dataclass
class JokeCell:
    prompt: str
    phrase: str
    n: int
    correct: int = 0
    errors: int = 0
    perplexities: list[float] = field(default_factory=list)

    @property
    def fraction_correct(self) -> float:
        return self.correct / self.n

    @property
    def median_perplexity(self) -> float:
        return float(np.median(self.perplexities)) if len(self.perplexities) > 0 else np.nan


@dataclass
class JokeGridResult:
    cells: dict[tuple[str, str], JokeCell]
    repetitions: int

    def to_frame(self) -> pd.DataFrame:
        rows = [{"prompt": c.prompt, "phrase": c.phrase, "fraction_correct": c.fraction_correct, "median_perplexity": c.median_perplexity,
                 "n": c.n, "errors": c.errors} for c in self.cells.values()]
        return pd.DataFrame(rows)


def joke_requests(model_id: str, repetitions: int, temperature: float, seed: int, placement: Placement, want_logprobs: bool) -> list[CompletionJob]:
    jobs = []
    for prompt in JOKE_PROMPTS:
        prompt_text = experiment_prompts(f"joke_{prompt}")
        for phrase_name, phrase in JOKE_PHRASES.items():
            rendered = render_text(phrase.corrupted, prompt_text, placement)
            for repetition in range(repetitions):
                request = ChatRequest(user=rendered.user, system=rendered.system, model_id=model_id, temperature=temperature,
                                      want_logprobs=want_logprobs, seed=seed + repetition, document=phrase.corrupted)
                jobs.append(CompletionJob(f"{prompt}|{phrase_name}|{repetition}", request, phrase_name, prompt, placement))
    return jobs


def run_joke_grid(provider: Provider, model_id: str, repetitions: int = JOKE_REPETITIONS, temperature: float = JOKE_TEMPERATURE, seed: int = 0,
                  match: Literal["exact", "contains"] = "exact", placement: Placement = "system_message", want_logprobs: bool = True) -> JokeGridResult:
    """
    Sends every corrupted joke phrase with every joke prompt repetitions times and counts the recovered answers.

    :param provider: Live or replay provider
    :param model_id: Model to ask
    :param repetitions: Requests per (prompt, phrase) cell
    :param temperature: Sampling temperature
    :param seed: First request seed (repetition i uses seed + i)
    :param match: "exact" (normalized equality) or "contains"
    :param placement: Where the prompt goes; the phrase is the text to correct
    :param want_logprobs: Ask for token log probabilities (for the perplexity)
    :return: JokeGridResult
    """
    if repetitions < 1:
        raise ValueError(f"repetitions must be at least 1, got {repetitions}")
    jobs = joke_requests(model_id, repetitions, temperature, seed, placement, want_logprobs)
    outcomes = complete_many(jobs, provider)

    cells = {(prompt, phrase): JokeCell(prompt, phrase, repetitions) for prompt in JOKE_PROMPTS for phrase in JOKE_PHRASES}
    for job in jobs:
        cell = cells[(job.prompt_label, job.doc_id)]
        outcome = outcomes[job.key]
        if isinstance(outcome, ProviderError):
            cell.errors += 1
            continue
        if is_correct(outcome.corrected_text, JOKE_PHRASES[job.doc_id].answer, match):
            cell.correct += 1
        if outcome.token_logprobs is not None and len(outcome.token_logprobs) > 0:
            cell.perplexities.append(perplexity(outcome.token_logprobs))
    return JokeGridResult(cells, repetitions)


@dataclass
class TaskLengthResult:
    table: pd.DataFrame
    documents: pd.DataFrame
    chunks: pd.DataFrame
    skipped: list[str]


def run_task_length(corpus: Sequence[DocumentPair], provider: Provider, model_id: str, block_sizes: Sequence[int] = VALID_BLOCK_SIZES,
                    prompts: Sequence[str] = TASK_LENGTH_PROMPTS, temperature: float = 0.0, placement: Placement = "text_suffix",
                    aggregation: AggregationMode = "median", policy: NormalizationPolicy = DEFAULT_POLICY) -> TaskLengthResult:
    """
    Corrects the first 60 lines of each long article in blocks of x lines, joins the corrected blocks with newlines and
    scores the result against the first 60 transcribed lines.

    :return: TaskLengthResult with the (block size x prompt) CER table, per-document and per-chunk CERs and the skipped ids
    """
    invalid = [x for x in block_sizes if x not in VALID_BLOCK_SIZES]
    if len(invalid) > 0:
        raise ValueError(f"Block sizes {invalid} are not allowed - please use a subset of {VALID_BLOCK_SIZES}")

    documents = select_long_articles(corpus, CHUNK_TOTAL_LINES)
    skipped = [doc.id for doc in corpus if doc.line_count < CHUNK_TOTAL_LINES]
    if len(skipped) > 0:
        printer.warning(f"{len(skipped)} document(s) have fewer than {CHUNK_TOTAL_LINES} aligned lines and are skipped")
    empty = [doc.id for doc in documents if policy.apply(truncate_lines(doc).gt_text) == ""]
    if len(empty) > 0:
        printer.warning(f"{len(empty)} document(s) have an empty transcription in their first {CHUNK_TOTAL_LINES} lines and are skipped")
        documents = [doc for doc in documents if doc.id not in empty]
        skipped += empty

    jobs, chunk_index = [], []
    for x in block_sizes:
        for prompt in prompts:
            prompt_text = experiment_prompts(f"chunk_{prompt}")
            for doc in documents:
                for chunk in chunk_lines(doc, x):
                    rendered = render_text(chunk.ocr_text, prompt_text, placement)
                    request = ChatRequest(user=rendered.user, system=rendered.system, model_id=model_id, temperature=temperature, document=chunk.ocr_text)
                    key = f"{x}|{prompt}|{chunk.id}"
                    jobs.append(CompletionJob(key, request, chunk.id, prompt, placement))
                    chunk_index.append((x, prompt, doc, chunk, key))
    outcomes = complete_many(jobs, provider)

    chunk_rows, corrected_by_doc = [], {}
    for x, prompt, doc, chunk, key in chunk_index:
        outcome = outcomes[key]
        corrected = "" if isinstance(outcome, ProviderError) else outcome.corrected_text
        corrected_by_doc.setdefault((x, prompt, doc.id), []).append(corrected)
        try:
            chunk_cer = TextMetrics.cer(chunk.gt_text, corrected, policy)
        except TextMetrics.EmptyReference:
            chunk_cer = np.nan
        chunk_rows.append({"block_size": x, "prompt": prompt, "doc_id": doc.id, "chunk_id": chunk.id, "cer": chunk_cer,
                           "error": f"{type(outcome).__name__}: {outcome}" if isinstance(outcome, ProviderError) else None})

    document_rows = []
    for doc in documents:
        truncated = truncate_lines(doc)
        for x in block_sizes:
            for prompt in prompts:
                reassembled = "\n".join(corrected_by_doc[(x, prompt, doc.id)])
                document_rows.append({"block_size": x, "prompt": prompt, "doc_id": doc.id,
                                      "cer_orig": TextMetrics.cer(truncated.gt_text, truncated.ocr_text, policy),
                                      "cer": TextMetrics.cer(truncated.gt_text, reassembled, policy)})
    document_frame = pd.DataFrame(document_rows, columns=["block_size", "prompt", "doc_id", "cer_orig", "cer"])

    table = pd.DataFrame(index=pd.Index(list(block_sizes), name="block_size"), columns=list(prompts), dtype=float)
    for (x, prompt), group in document_frame.groupby(["block_size", "prompt"]):
        table.loc[x, prompt] = TextMetrics.aggregate(group["cer"].to_list(), aggregation)
    return TaskLengthResult(table, document_frame, pd.DataFrame(chunk_rows, columns=["block_size", "prompt", "doc_id", "chunk_id", "cer", "error"]), skipped)
