import pytest

from Corpus import DocumentPair, write_corpus
from EntityMetrics import GazetteerBackend


def noisy(line: str) -> str:
    return line.replace("o", "0").replace("l", "1")


def line_aligned_document(doc_id: str, n_lines: int, dataset: str = "SMH") -> DocumentPair:
    lines = []
    for i in range(n_lines):
        gt = f"Line {i} of {doc_id}: the council met in Sydney on Tuesday."
        lines.append((noisy(gt) if i % 2 == 0 else gt, gt))
    return DocumentPair.from_lines(doc_id, lines, dataset, periodical="Sydney Morning Herald")


@pytest.fixture
def small_corpus() -> list[DocumentPair]:
    return [
        DocumentPair("smh-1", "Jim 1eft L0nd0n on the m0rning train.", "Jim left London on the morning train.", "SMH"),
        DocumentPair("smh-2", "The c0unci1 met t0day.", "The council met today.", "SMH"),
        DocumentPair("ncse-1", "Jane Aust1n wr0te a n0vel.", "Jane Austen wrote a novel.", "NCSE"),
        DocumentPair("ncse-2", "A perfect line of type.", "A perfect line of type.", "NCSE"),
    ]


@pytest.fixture
def corpus_file(tmp_path, small_corpus) -> str:
    path = tmp_path / "corpus.jsonl"
    write_corpus(small_corpus, path)
    return str(path)


@pytest.fixture
def long_corpus() -> list[DocumentPair]:
    return [line_aligned_document("long-a", 64), line_aligned_document("long-b", 60), line_aligned_document("short-c", 59)]


@pytest.fixture
def twenty_document_corpus() -> list[DocumentPair]:
    documents = []
    for i in range(20):
        gt = f"Article {i}: Jim left London for Paris with {i} companions and a dog."
        documents.append(DocumentPair(f"doc-{i:02d}", noisy(gt) if i % 5 != 0 else gt, gt, "SMH" if i < 10 else "NCSE"))
    return documents


@pytest.fixture
def gazetteer() -> GazetteerBackend:
    return GazetteerBackend({"Jim": "PER", "London": "LOC", "Paris": "LOC"})
