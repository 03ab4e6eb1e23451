import json

import numpy as np
import pytest

import Corpus
from Corpus import DocumentPair
from printer import Printer

printer = Printer.getInstance()

OVERPROOF_SAMPLE = """*$*OVERPROOF*$* 18378453 year 1865 type Article title NEWS
Tbe c0unci1 met||@@||The council met||@@||The council met
yesterday at n0on.||@@||yesterday at noon.||@@||yesterday at noon.

*$*OVERPROOF*$* 18378454 year 1866 type Article title ADVERT
F0R SALE||@@||FOR SALE

a g00d h0rse||@@||a good horse

"""


def page(symbols: int, tokens: int = 500) -> str:
    return " ".join(["word"] * (tokens - 1) + [":" * symbols + "x"])


def write_jsonl(path, records) -> None:
    path.write_text("".join(json.dumps(record) + "\n" for record in records), encoding="utf-8")


def test_load_empty_corpus(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("", encoding="utf-8")
    assert Corpus.load_corpus(path) == []


def test_load_corpus_round_trip(corpus_file, small_corpus):
    documents = Corpus.load_corpus(corpus_file)
    assert [doc.id for doc in documents] == [doc.id for doc in small_corpus]
    assert documents == small_corpus


def test_load_two_records(tmp_path):
    path = tmp_path / "two.jsonl"
    write_jsonl(path, [{"id": "a", "ocr_text": "x", "gt_text": "y", "dataset": "SMH"},
                       {"id": "b", "ocr_text": "x\nz", "gt_text": "y\nz", "dataset": "SMH", "periodical": None, "lines": [["x", "y"], ["z", "z"]]}])
    documents = Corpus.load_corpus(path)
    assert [doc.id for doc in documents] == ["a", "b"]
    assert documents[1].line_count == 2


@pytest.mark.parametrize("record, error", [
    ({"id": "a", "ocr_text": "x", "gt_text": "y", "dataset": "SMH", "lines": [["x"]]}, Corpus.LineMisalignment),
    ({"id": "a", "ocr_text": "x", "gt_text": "y", "dataset": "SMH", "lines": [["x", "q"]]}, Corpus.LineMisalignment),
    ({"id": "a", "ocr_text": "x", "dataset": "SMH"}, Corpus.ParseError),
    ({"id": 3, "ocr_text": "x", "gt_text": "y", "dataset": "SMH"}, Corpus.ParseError),
    ({"id": "a", "ocr_text": "x", "gt_text": "y", "dataset": "SMH", "lines": "x"}, Corpus.ParseError),
])
def test_load_corpus_rejects_invalid_records(tmp_path, record, error):
    path = tmp_path / "bad.jsonl"
    write_jsonl(path, [record])
    with pytest.raises(error):
        Corpus.load_corpus(path)


def test_load_corpus_rejects_duplicates_and_bad_json(tmp_path):
    path = tmp_path / "dup.jsonl"
    write_jsonl(path, [{"id": "a", "ocr_text": "x", "gt_text": "y", "dataset": "SMH"}] * 2)
    with pytest.raises(Corpus.DuplicateId):
        Corpus.load_corpus(path)

    path.write_text('{"id": "a",\n', encoding="utf-8")
    with pytest.raises(Corpus.ParseError, match="line 1"):
        Corpus.load_corpus(path)


def test_import_overproof(tmp_path):
    path = tmp_path / "overproof.txt"
    path.write_text(OVERPROOF_SAMPLE, encoding="utf-8")
    documents = Corpus.import_overproof(path)

    assert [doc.id for doc in documents] == ["18378453", "18378454"]
    first, second = documents
    assert first.ocr_text == "Tbe c0unci1 met\nyesterday at n0on." and first.gt_text == "The council met\nyesterday at noon."
    assert first.baseline_text == "The council met\nyesterday at noon."
    assert first.dataset == "SMH"
    assert second.line_count == 3, "Blank lines inside an article are kept as empty pairs"
    assert second.baseline_text is None
    for doc in documents:
        doc.validate()


def test_import_overproof_errors(tmp_path):
    path = tmp_path / "overproof.txt"
    path.write_text("no header||@@||here\n", encoding="utf-8")
    with pytest.raises(Corpus.ParseError):
        Corpus.import_overproof(path)

    path.write_text("*$*OVERPROOF*$* 1\nmissing separator\n", encoding="utf-8")
    with pytest.raises(Corpus.ParseError):
        Corpus.import_overproof(path)

    path.write_text("*$*OVERPROOF*$* 1\na||@@||a\n*$*OVERPROOF*$* 1\nb||@@||b\n", encoding="utf-8")
    with pytest.raises(Corpus.DuplicateId):
        Corpus.import_overproof(path)


def test_import_directory(tmp_path):
    (tmp_path / "ocr").mkdir()
    (tmp_path / "gt").mkdir()
    for doc_id, ocr, gt in [("b", "G00d", "Good"), ("a", "Tbe", "The")]:
        (tmp_path / "ocr" / f"{doc_id}.txt").write_text(ocr, encoding="utf-8")
        (tmp_path / "gt" / f"{doc_id}.txt").write_text(gt, encoding="utf-8")
    (tmp_path / "ocr" / "orphan.txt").write_text("x", encoding="utf-8")
    (tmp_path / "metadata.csv").write_text("id,periodical\na,The Northern Star\nb,\n", encoding="utf-8")

    documents = Corpus.import_directory(tmp_path, "NCSE")
    assert [doc.id for doc in documents] == ["a", "b"]
    assert documents[0].periodical == "The Northern Star" and documents[1].periodical is None
    assert documents[1].ocr_text == "G00d" and documents[1].dataset == "NCSE"


def test_import_directory_needs_both_folders(tmp_path):
    with pytest.raises(FileNotFoundError):
        Corpus.import_directory(tmp_path, "NCSE")


@pytest.mark.parametrize("text, tokens, symbols", [("hello world", 2, 0), ("** hello **", 3, 4), ("a >> b", 3, 2)])
def test_quality_stats(text, tokens, symbols):
    stats = Corpus.quality_stats(text)
    assert (stats.token_count, stats.symbol_count) == (tokens, symbols)
    assert stats.symbol_token_ratio == pytest.approx(symbols / tokens)


def test_quality_stats_of_noisy_scan():
    transcription = "FOR SALE, a good horse, apply to Mr. Smith, George-street."
    ocr = "F0R SA|E ;; a g00d h0rse: app|y t0 Mr. Sm*th, Ge0rge-street. '' _ !"
    assert Corpus.quality_stats(ocr).symbol_token_ratio > Corpus.quality_stats(transcription).symbol_token_ratio


def test_quality_stats_of_empty_text():
    with pytest.raises(Corpus.EmptyText):
        Corpus.quality_stats("   ")


def test_filter_pages_drops_top_ratio():
    pages = [("SMH", page(i)) for i in range(10)]
    retained = Corpus.filter_pages(pages)
    assert len(retained) == 9
    assert pages[9] not in retained, "The page with the highest symbol ratio must be dropped"


def test_filter_pages_short_page_dropped():
    pages = [("SMH", page(0, tokens=499))] + [("SMH", page(i)) for i in range(10)]
    retained = Corpus.filter_pages(pages)
    assert pages[0] not in retained
    assert len(retained) == 9


def test_filter_pages_ties_are_kept():
    pages = [("SMH", page(3)) for _ in range(10)]
    assert len(Corpus.filter_pages(pages)) == 10


def test_filter_pages_per_periodical():
    pages = [("SMH", page(i)) for i in range(10)] + [("NCSE", page(i + 20)) for i in range(10)]
    retained = Corpus.filter_pages(pages)
    assert len(retained) == 18
    assert ("SMH", page(9)) not in retained and ("NCSE", page(29)) not in retained


def test_filter_pages_rejects_bad_ratio():
    with pytest.raises(ValueError):
        Corpus.filter_pages([("SMH", page(0))], drop_top_ratio=1.0)


def test_filter_articles():
    articles = [DocumentPair("hundred", " ".join(["w"] * 100), "x", "SMH"), DocumentPair("short", " ".join(["w"] * 99), "x", "SMH")]
    assert [doc.id for doc in Corpus.filter_articles(articles)] == ["hundred"]
    assert Corpus.filter_articles([]) == []


def test_load_pages(tmp_path):
    path = tmp_path / "pages.jsonl"
    write_jsonl(path, [{"periodical": "SMH", "text": "a b"}])
    assert Corpus.load_pages(path) == [("SMH", "a b")]
    write_jsonl(path, [{"text": "a b"}])
    with pytest.raises(Corpus.ParseError):
        Corpus.load_pages(path)


def test_select_long_articles(long_corpus, small_corpus):
    assert [doc.id for doc in Corpus.select_long_articles(long_corpus, 60)] == ["long-a", "long-b"]
    assert len(Corpus.select_long_articles(long_corpus + small_corpus, 0)) == 7


@pytest.mark.parametrize("x", Corpus.VALID_BLOCK_SIZES)
def test_chunk_lines(long_corpus, x):
    doc = long_corpus[0]
    chunks = Corpus.chunk_lines(doc, x)
    truncated = Corpus.truncate_lines(doc)

    assert len(chunks) == 60 // x
    assert [chunk.id for chunk in chunks] == [f"long-a#{k}" for k in range(1, 60 // x + 1)]
    assert all(chunk.line_count == x for chunk in chunks)
    assert "\n".join(chunk.ocr_text for chunk in chunks) == truncated.ocr_text
    assert "\n".join(chunk.gt_text for chunk in chunks) == truncated.gt_text


def test_chunk_lines_errors(long_corpus, small_corpus):
    with pytest.raises(Corpus.InvalidBlockSize):
        Corpus.chunk_lines(long_corpus[0], 7)
    with pytest.raises(Corpus.TooFewLines):
        Corpus.chunk_lines(long_corpus[2], 5)
    with pytest.raises(Corpus.TooFewLines):
        Corpus.chunk_lines(small_corpus[0], 5)


def test_corpus_overview(small_corpus, long_corpus):
    overview = Corpus.corpus_overview(small_corpus + long_corpus).set_index("dataset")
    assert overview.loc["NCSE", "documents"] == 2
    assert overview.loc["SMH", "documents"] == 5
    assert overview.loc["SMH", "line_aligned"] == 3


def test_filter_pages_ignores_empty_pages():
    pages = [("SMH", page(i)) for i in range(9)] + [("SMH", "")]
    retained = Corpus.filter_pages(pages, min_tokens=0)
    assert retained == pages[:9], "An empty page has no ratio and must not drop its whole periodical"


def test_quality_stats_invariant_under_duplication():
    rng = np.random.default_rng(12)
    alphabet = list("abc  \n:;|*'")
    for trial in range(500):
        text = "w " + "".join(rng.choice(alphabet, size=int(rng.integers(1, 80))))
        single, double = Corpus.quality_stats(text), Corpus.quality_stats(text + "\n" + text)
        assert (double.token_count, double.symbol_count) == (2 * single.token_count, 2 * single.symbol_count), f"Trial {trial}: counts must double"
        assert double.symbol_token_ratio == pytest.approx(single.symbol_token_ratio), f"Trial {trial}: duplication changed the ratio"


def test_filter_pages_properties():
    rng = np.random.default_rng(13)
    for trial in range(200):
        pages = [(str(rng.choice(["SMH", "NCSE"])), page(int(rng.integers(0, 40)), tokens=int(rng.integers(480, 520)))) for _ in range(int(rng.integers(1, 25)))]
        retained = Corpus.filter_pages(pages)
        retained_ids = {id(p) for p in retained}
        assert all(len(text.split()) >= Corpus.MIN_PAGE_TOKENS for _, text in retained), f"Trial {trial}: a short page was retained"

        for periodical in {p for p, _ in pages}:
            eligible = [p for p in pages if p[0] == periodical and len(p[1].split()) >= Corpus.MIN_PAGE_TOKENS]
            ratios = {id(p): Corpus.quality_stats(p[1]).symbol_token_ratio for p in eligible}
            for dropped in (p for p in eligible if id(p) not in retained_ids):
                higher = [p for p in eligible if ratios[id(p)] > ratios[id(dropped)]]
                assert all(id(p) not in retained_ids for p in higher), f"Trial {trial}: a page with a higher ratio than a dropped page was kept"

        smaller_drop = Corpus.filter_pages(pages, drop_top_ratio=0.05)
        assert set(map(id, retained)) <= set(map(id, smaller_drop)), f"Trial {trial}: dropping a smaller share must keep every page kept before"
