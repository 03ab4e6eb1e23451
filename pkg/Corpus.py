import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
import pandas as pd

from printer import Printer

printer = Printer.getInstance()

KNOWN_DATASETS = ("NCSE", "SMH", "CA")
VALID_BLOCK_SIZES = (2, 5, 10, 15, 30, 60)
CHUNK_TOTAL_LINES = 60

# Comma is not part of the set, ">>" is counted through its ">" characters
DEFAULT_SYMBOLS = ":;-_+*^|¦'!/>]["
MIN_PAGE_TOKENS = 500
MIN_ARTICLE_TOKENS = 100
DROP_TOP_RATIO = 0.10

OVERPROOF_HEADER = "*$*OVERPROOF*$*"
OVERPROOF_SEPARATOR = "||@@||"


class ParseError(ValueError):
    pass


class DuplicateId(ValueError):
    pass


class LineMisalignment(ValueError):
    pass


class EmptyText(ValueError):
    pass


class TooFewLines(ValueError):
    pass


class InvalidBlockSize(ValueError):
    pass


@dataclass(frozen=True)
class DocumentPair:
    """
    One article: raw OCR, its transcription and, for line-aligned corpora, the parallel lines.
    baseline_text optionally holds a third-party correction of the OCR.
    """
    id: str
    ocr_text: str
    gt_text: str
    dataset: str
    periodical: Optional[str] = None
    lines: Optional[tuple[tuple[str, str], ...]] = None
    baseline_text: Optional[str] = None

    def validate(self) -> None:
        if self.lines is None:
            return
        if any(len(pair) != 2 for pair in self.lines):
            raise LineMisalignment(f"Document '{self.id}' has line entries that are not (ocr, gt) pairs")
        if "\n".join(pair[0] for pair in self.lines) != self.ocr_text:
            raise LineMisalignment(f"Document '{self.id}': OCR lines do not join to ocr_text")
        if "\n".join(pair[1] for pair in self.lines) != self.gt_text:
            raise LineMisalignment(f"Document '{self.id}': transcription lines do not join to gt_text")

    @property
    def line_count(self) -> int:
        return 0 if self.lines is None else len(self.lines)

    def to_dict(self) -> dict:
        record = {"id": self.id, "dataset": self.dataset, "periodical": self.periodical, "ocr_text": self.ocr_text, "gt_text": self.gt_text,
                  "lines": None if self.lines is None else [list(pair) for pair in self.lines]}
        if self.baseline_text is not None:
            record["baseline_text"] = self.baseline_text
        return record

    @staticmethod
    def from_lines(doc_id: str, lines: Sequence[tuple[str, str]], dataset: str, periodical: Optional[str] = None, baseline_text: Optional[str] = None) -> "DocumentPair":
        lines = tuple((ocr, gt) for ocr, gt in lines)
        return DocumentPair(id=doc_id, ocr_text="\n".join(p[0] for p in lines), gt_text="\n".join(p[1] for p in lines), dataset=dataset,
                            periodical=periodical, lines=lines, baseline_text=baseline_text)


def _record_to_document(record: dict, line_number: int, path: str) -> DocumentPair:
    where = f"line {line_number} of '{path}'"
    if not isinstance(record, dict):
        raise ParseError(f"Expected a JSON object on {where}")
    for key in ("id", "ocr_text", "gt_text", "dataset"):
        if not isinstance(record.get(key), str):
            raise ParseError(f"Field '{key}' is missing or not a string on {where}")
    for key in ("periodical", "baseline_text"):
        if record.get(key) is not None and not isinstance(record[key], str):
            raise ParseError(f"Field '{key}' must be a string or null on {where}")

    lines = record.get("lines")
    if lines is not None:
        if not isinstance(lines, list):
            raise ParseError(f"Field 'lines' must be a list of [ocr, gt] pairs or null on {where}")
        if any(not isinstance(pair, list) or not all(isinstance(s, str) for s in pair) for pair in lines):
            raise ParseError(f"Field 'lines' must only contain lists of strings on {where}")
        if any(len(pair) != 2 for pair in lines):
            raise LineMisalignment(f"Document '{record['id']}' on {where} has lines whose OCR and transcription sides differ in count")
        lines = tuple((pair[0], pair[1]) for pair in lines)

    doc = DocumentPair(id=record["id"], ocr_text=record["ocr_text"], gt_text=record["gt_text"], dataset=record["dataset"],
                       periodical=record.get("periodical"), lines=lines, baseline_text=record.get("baseline_text"))
    try:
        doc.validate()
    except LineMisalignment as e:
        raise LineMisalignment(f"{e} ({where})") from e
    return doc


def load_corpus(path: str | Path) -> list[DocumentPair]:
    """
    Loads a JSONL corpus, one DocumentPair per line. Blank lines are ignored.

    :param path: Path to the JSONL file
    :return: List of DocumentPairs in file order
    """
    documents, seen = [], {}
    with open(path, encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if line.strip() == "":
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(f"Invalid JSON on line {line_number} of '{path}': {e.msg}") from e
            doc = _record_to_document(record, line_number, str(path))
            if doc.id in seen:
                raise DuplicateId(f"Document id '{doc.id}' on line {line_number} of '{path}' was already used on line {seen[doc.id]}")
            seen[doc.id] = line_number
            documents.append(doc)
    return documents


def write_corpus(documents: Iterable[DocumentPair], path: str | Path) -> int:
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for doc in documents:
            f.write(json.dumps(doc.to_dict(), ensure_ascii=False) + "\n")
            count += 1
    return count


def import_overproof(path: str | Path, dataset: str = "SMH") -> list[DocumentPair]:
    """
    Reads the line-aligned Overproof evaluation format: every article starts with a header line
    '*$*OVERPROOF*$* <id> ...', followed by 'ocr||@@||transcription[||@@||overproof]' lines.
    Lines without separator (blank lines inside an article) are kept as empty pairs.

    :param path: Path to the Overproof text file
    :param dataset: Dataset name to assign
    :return: List of DocumentPairs with lines filled
    """
    documents = []
    current_id, current_lines, current_baseline = None, [], []

    def flush():
        if current_id is None:
            return
        while len(current_lines) > 0 and current_lines[-1] == ("", ""):  # Trailing blank lines belong to the article separation
            current_lines.pop()
            current_baseline.pop()
        baseline = None
        if any(b is not None for b in current_baseline):
            baseline = "\n".join(b if b is not None else "" for b in current_baseline)
        documents.append(DocumentPair.from_lines(current_id, current_lines, dataset, baseline_text=baseline))

    with open(path, encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            line = line.rstrip("\r\n")
            if line.startswith(OVERPROOF_HEADER):
                flush()
                fields = line[len(OVERPROOF_HEADER):].split()
                if len(fields) == 0:
                    raise ParseError(f"Article header without id on line {line_number} of '{path}'")
                current_id, current_lines, current_baseline = fields[0], [], []
                continue
            if current_id is None:
                if line.strip() == "":
                    continue
                raise ParseError(f"Text before the first article header on line {line_number} of '{path}'")
            if OVERPROOF_SEPARATOR not in line:
                if line.strip() != "":
                    raise ParseError(f"Line {line_number} of '{path}' has no '{OVERPROOF_SEPARATOR}' separator")
                current_lines.append(("", ""))
                current_baseline.append(None)
                continue
            columns = line.split(OVERPROOF_SEPARATOR)
            if len(columns) not in (2, 3):
                raise ParseError(f"Line {line_number} of '{path}' has {len(columns)} columns, expected 2 or 3")
            current_lines.append((columns[0], columns[1]))
            current_baseline.append(columns[2] if len(columns) == 3 else None)
    flush()

    ids = [doc.id for doc in documents]
    duplicates = sorted({i for i in ids if ids.count(i) > 1})
    if len(duplicates) > 0:
        raise DuplicateId(f"Article ids {duplicates} occur more than once in '{path}'")
    return documents


def import_directory(root: str | Path, dataset: str) -> list[DocumentPair]:
    """
    Reads a directory with 'ocr/<id>.txt' and 'gt/<id>.txt' per article and an optional
    'metadata.csv' with the columns 'id' and 'periodical'.

    :param root: Corpus directory
    :param dataset: Dataset name to assign
    :return: List of DocumentPairs sorted by id
    """
    root = Path(root)
    ocr_dir, gt_dir = root / "ocr", root / "gt"
    if not ocr_dir.is_dir() or not gt_dir.is_dir():
        raise FileNotFoundError(f"Expected the folders '{ocr_dir}' and '{gt_dir}'")

    periodicals = {}
    if (root / "metadata.csv").exists():
        metadata = pd.read_csv(root / "metadata.csv", dtype=str, keep_default_na=False)
        if "id" not in metadata.columns:
            raise ParseError(f"'{root / 'metadata.csv'}' has no 'id' column")
        if "periodical" in metadata.columns:
            periodicals = {row.id: (row.periodical or None) for row in metadata.itertuples()}

    ocr_ids = {p.stem for p in ocr_dir.glob("*.txt")}
    gt_ids = {p.stem for p in gt_dir.glob("*.txt")}
    for missing in sorted(ocr_ids ^ gt_ids):
        printer.warning(f"Article '{missing}' is missing its {'transcription' if missing in ocr_ids else 'OCR'} file - skipping")

    return [DocumentPair(id=doc_id, ocr_text=(ocr_dir / f"{doc_id}.txt").read_text(encoding="utf-8"), gt_text=(gt_dir / f"{doc_id}.txt").read_text(encoding="utf-8"),
                         dataset=dataset, periodical=periodicals.get(doc_id))
            for doc_id in sorted(ocr_ids & gt_ids)]


@dataclass(frozen=True)
class QualityStats:
    token_count: int
    symbol_count: int
    symbol_token_ratio: float


def quality_stats(text: str, symbol_set: str = DEFAULT_SYMBOLS) -> QualityStats:
    """
    Counts whitespace tokens and noise symbols; a high symbol-to-token ratio points to a poor scan.
    """
    token_count = len(text.split())
    if token_count == 0:
        raise EmptyText("Text has no tokens, the symbol-to-token ratio is undefined")
    symbols = set(symbol_set)
    symbol_count = sum(1 for char in text if char in symbols)
    return QualityStats(token_count, symbol_count, symbol_count / token_count)


def load_pages(path: str | Path) -> list[tuple[str, str]]:
    pages = []
    with open(path, encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if line.strip() == "":
                continue
            try:
                record = json.loads(line)
                pages.append((str(record["periodical"]), str(record["text"])))
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                raise ParseError(f"Line {line_number} of '{path}' is not a page object {{'periodical', 'text'}}") from e
    return pages


def filter_pages(pages: Sequence[tuple[str, str]], min_tokens: int = MIN_PAGE_TOKENS, drop_top_ratio: float = DROP_TOP_RATIO,
                 symbol_set: str = DEFAULT_SYMBOLS) -> list[tuple[str, str]]:
    """
    Drops pages with fewer than min_tokens tokens, then per periodical the pages whose symbol-to-token ratio lies
    strictly above the nearest-rank (1 - drop_top_ratio) percentile of that periodical.

    :param pages: List of (periodical, page text)
    :return: Retained pages in input order
    """
    if not 0 <= drop_top_ratio < 1:
        raise ValueError(f"drop_top_ratio must be in [0, 1), got {drop_top_ratio}")
    if len(pages) == 0:
        return []

    rows = []
    for index, (periodical, text) in enumerate(pages):
        tokens = len(text.split())
        ratio = quality_stats(text, symbol_set).symbol_token_ratio if tokens > 0 else np.nan
        rows.append({"index": index, "periodical": periodical, "tokens": tokens, "ratio": ratio})
    df = pd.DataFrame(rows)

    # Empty pages have no ratio and are never retained
    df = df[(df["tokens"] >= min_tokens) & (df["tokens"] > 0)]
    if len(df) == 0:
        return []
    df["threshold"] = df.groupby("periodical")["ratio"].transform(lambda s: np.quantile(s.to_numpy(), 1 - drop_top_ratio, method="inverted_cdf"))
    retained = df[df["ratio"] <= df["threshold"]]
    return [pages[i] for i in sorted(retained["index"])]


def filter_articles(articles: Sequence[DocumentPair], min_tokens: int = MIN_ARTICLE_TOKENS) -> list[DocumentPair]:
    return [doc for doc in articles if len(doc.ocr_text.split()) >= min_tokens]


def select_long_articles(corpus: Sequence[DocumentPair], min_lines: int) -> list[DocumentPair]:
    # Documents without line alignment count as having no lines
    return [doc for doc in corpus if doc.line_count >= min_lines]


@dataclass(frozen=True)
class ChunkPlan:
    block_size: int
    chunks: tuple[tuple[int, int], ...] = field(default_factory=tuple)


def plan_chunks(x: int, total: int = CHUNK_TOTAL_LINES) -> ChunkPlan:
    """
    Splits lines [0, total) into contiguous half-open ranges of x lines.
    """
    if x not in VALID_BLOCK_SIZES:
        raise InvalidBlockSize(f"Block size {x} is not allowed - please use one of {VALID_BLOCK_SIZES}")
    return ChunkPlan(x, tuple((start, start + x) for start in range(0, total, x)))


def truncate_lines(doc: DocumentPair, n: int = CHUNK_TOTAL_LINES) -> DocumentPair:
    if doc.lines is None or len(doc.lines) < n:
        raise TooFewLines(f"Document '{doc.id}' has {doc.line_count} aligned lines, at least {n} are needed")
    return DocumentPair.from_lines(doc.id, doc.lines[:n], doc.dataset, doc.periodical)


def chunk_lines(doc: DocumentPair, x: int) -> list[DocumentPair]:
    """
    Truncates the document to its first 60 line pairs and cuts it into 60/x children '<id>#<k>' (k from 1).
    Joining the children with newlines reproduces the truncated document on both sides.

    :param doc: Line-aligned document with at least 60 lines
    :param x: Block size, one of 2, 5, 10, 15, 30, 60
    :return: Children in line order
    """
    plan = plan_chunks(x)
    truncated = truncate_lines(doc)
    return [DocumentPair.from_lines(f"{doc.id}#{k}", truncated.lines[start:end], doc.dataset, doc.periodical)
            for k, (start, end) in enumerate(plan.chunks, start=1)]


def corpus_overview(documents: Sequence[DocumentPair]) -> pd.DataFrame:
    """
    Document count, token counts and line alignment per dataset.
    """
    if len(documents) == 0:
        return pd.DataFrame(columns=["dataset", "documents", "median_tokens", "line_aligned"])
    df = pd.DataFrame([{"dataset": d.dataset, "tokens": len(d.ocr_text.split()), "aligned": d.lines is not None} for d in documents])
    overview = df.groupby("dataset").agg(documents=("tokens", "size"), median_tokens=("tokens", "median"), line_aligned=("aligned", "sum"))
    return overview.reset_index()
