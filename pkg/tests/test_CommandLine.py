import json

import pytest

import CommandLine
import Experiments
from printer import Printer

printer = Printer.getInstance()


def run(capsys, *argv: str) -> tuple[int, str, str]:
    exit_code = CommandLine.main(list(argv))
    captured = capsys.readouterr()
    return exit_code, captured.out, captured.err


def test_evaluate_transcription_gives_full_error_reduction(capsys, corpus_file):
    exit_code, out, _ = run(capsys, "evaluate", "--corpus", corpus_file, "--hypothesis-from", "gt")
    assert exit_code == 0
    assert "100.00" in out
    assert "0.00" in out


def test_correct_with_echo_then_report(capsys, corpus_file, tmp_path):
    results = str(tmp_path / "results.jsonl")
    exit_code, _, _ = run(capsys, "correct", "--corpus", corpus_file, "--output", results, "--provider", "echo", "--prompts", "basic-prompt")
    assert exit_code == 0
    assert len(Experiments.load_results(results)) == 4

    before = open(results, encoding="utf-8").read()
    exit_code, out, _ = run(capsys, "report", "--results", results, "--format", "csv")
    assert exit_code == 0
    header, *rows = out.splitlines()
    assert header == "Model,NCSE CER,NCSE ERP,SMH CER,SMH ERP"
    assert rows[0].startswith("Original,")
    assert rows[1].startswith("echo,") and rows[1].endswith(",0.0")
    assert open(results, encoding="utf-8").read() == before, "Reports must not modify the results"

    exit_code, out, _ = run(capsys, "report", "--results", results, "--aggregation", "both")
    assert exit_code == 0 and "ERP" in out


def test_correct_dry_run(capsys, corpus_file, tmp_path):
    exit_code, out, _ = run(capsys, "correct", "--corpus", corpus_file, "--output", str(tmp_path / "r.jsonl"), "--dry-run")
    assert exit_code == 0
    assert "cells: 8" in out, "Two default prompts on four documents"
    assert not (tmp_path / "r.jsonl").exists()


def test_correct_with_replay_fixtures(capsys, corpus_file, tmp_path):
    fixtures = tmp_path / "fixtures.jsonl"
    fixtures.write_text("", encoding="utf-8")
    results = tmp_path / "results.jsonl"
    exit_code, _, err = run(capsys, "correct", "--corpus", corpus_file, "--output", str(results), "--provider", "replay", "--fixtures", str(fixtures),
                            "--prompts", "basic")
    assert exit_code == 0, "Failed cells are recorded, not fatal"
    assert Experiments.load_results(results)["error"].notna().all()
    assert "rerun" in err


def test_unknown_flag(capsys):
    exit_code, _, err = run(capsys, "report", "--results", "x.jsonl", "--colour")
    assert exit_code == 1
    assert "usage" in err.lower()


def test_missing_subcommand(capsys):
    assert run(capsys)[0] == 1


def test_help(capsys):
    exit_code, out, _ = run(capsys, "--help")
    assert exit_code == 0
    assert "correct" in out


def test_missing_api_key_exits_with_provider_failure(capsys, corpus_file, tmp_path, monkeypatch):
    monkeypatch.delenv("CLOCRC_API_KEY_OPENAI", raising=False)
    exit_code, _, err = run(capsys, "correct", "--corpus", corpus_file, "--output", str(tmp_path / "r.jsonl"), "--provider", "openai",
                            "--model", "gpt-3.5-turbo")
    assert exit_code == 2
    assert "CLOCRC_API_KEY_OPENAI" in err


def test_live_provider_needs_model(capsys, corpus_file, tmp_path):
    exit_code, _, _ = run(capsys, "correct", "--corpus", corpus_file, "--output", str(tmp_path / "r.jsonl"), "--provider", "openai")
    assert exit_code == 1


def test_missing_corpus_file(capsys, tmp_path):
    exit_code, _, err = run(capsys, "evaluate", "--corpus", str(tmp_path / "missing.jsonl"), "--hypothesis-from", "ocr")
    assert exit_code == 1
    assert "missing.jsonl" in err


def test_config_file_sets_defaults(tmp_path, monkeypatch):
    monkeypatch.setenv("CLOCRC_TEST_WINDOW", "4")
    config = tmp_path / "clocrc.conf"
    config.write_text("# scoring\nwindow=$CLOCRC_TEST_WINDOW\ncaseFold=true\nprompts=full-context\nunknownKey=1\n", encoding="utf-8")

    args = CommandLine.parse_arguments(["correct", "--corpus", "c.jsonl", "--output", "r.jsonl", "--config", str(config)])
    assert args.window == 4 and args.caseFold is True and args.prompts == ["full-context"]

    args = CommandLine.parse_arguments(["correct", "--corpus", "c.jsonl", "--output", "r.jsonl", "--config", str(config), "--window", "12"])
    assert args.window == 12, "Flags override the config file"


def test_config_file_errors(tmp_path):
    config = tmp_path / "bad.conf"
    config.write_text("window 4\n", encoding="utf-8")
    with pytest.raises(ValueError, match="Line 1"):
        CommandLine.read_config_file(config)

    config.write_text("caseFold=maybe\n", encoding="utf-8")
    with pytest.raises(ValueError):
        CommandLine.parse_arguments(["evaluate", "--corpus", "c.jsonl", "--hypothesis-from", "gt", "--config", str(config)])


def test_prompts_export(capsys, tmp_path):
    exit_code, out, _ = run(capsys, "prompts", "export")
    assert exit_code == 0
    assert "full-context" in json.loads(out)["combined_prompts"]

    path = tmp_path / "prompts.json"
    assert run(capsys, "prompts", "export", "--output", str(path))[0] == 0
    assert json.loads(path.read_text(encoding="utf-8")) == json.loads(out)


def test_corpus_import_and_filter(capsys, tmp_path):
    source = tmp_path / "overproof.txt"
    source.write_text("*$*OVERPROOF*$* 1 year 1870\n" + "".join(f"w{i}||@@||w{i}\n" for i in range(120)) + "*$*OVERPROOF*$* 2\nshort||@@||short\n",
                      encoding="utf-8")
    corpus = tmp_path / "corpus.jsonl"
    assert run(capsys, "corpus", "import", "--format", "overproof", "--input", str(source), "--output", str(corpus))[0] == 0

    retained = tmp_path / "retained.jsonl"
    assert run(capsys, "corpus", "filter", "--corpus", str(corpus), "--output", str(retained))[0] == 0
    records = [json.loads(line) for line in retained.read_text(encoding="utf-8").splitlines()]
    assert [record["id"] for record in records] == ["1"]
    assert records[0]["dataset"] == "SMH" and len(records[0]["lines"]) == 120


def test_stats_bootstrap_from_files(capsys, tmp_path):
    sample_a, sample_b = tmp_path / "a.txt", tmp_path / "b.txt"
    sample_a.write_text("1\n2\n3\n4\n", encoding="utf-8")
    sample_b.write_text("1\n2\n3\n4\n", encoding="utf-8")
    exit_code, out, _ = run(capsys, "stats", "bootstrap", "--sample-a", str(sample_a), "--sample-b", str(sample_b), "--resamples", "200")
    assert exit_code == 0
    assert "p_value: 1.000000" in out


def test_stats_bootstrap_needs_samples(capsys):
    assert run(capsys, "stats", "bootstrap")[0] == 1


def test_experiment_chunks_dry_run(capsys, tmp_path, long_corpus):
    from Corpus import write_corpus

    corpus = tmp_path / "long.jsonl"
    write_corpus(long_corpus, corpus)
    exit_code, out, _ = run(capsys, "experiment", "chunks", "--corpus", str(corpus), "--block-sizes", "5,30", "--dry-run")
    assert exit_code == 0
    assert "documents: 2 of 3" in out
    assert f"requests: {(12 + 2) * 3 * 2}" in out


def test_experiment_joke_with_echo(capsys, tmp_path):
    output = tmp_path / "joke.csv"
    exit_code, out, _ = run(capsys, "experiment", "joke", "--repetitions", "2", "--output", str(output))
    assert exit_code == 0
    assert "Joke recovery" in out
    assert len(output.read_text(encoding="utf-8").splitlines()) == 10


def test_evaluate_baseline_column_dry_run(capsys, tmp_path):
    source = tmp_path / "overproof.txt"
    source.write_text("*$*OVERPROOF*$* 1\nTbe||@@||The||@@||The\n*$*OVERPROOF*$* 2\nG00d||@@||Good\n", encoding="utf-8")
    corpus = tmp_path / "corpus.jsonl"
    assert run(capsys, "corpus", "import", "--format", "overproof", "--input", str(source), "--output", str(corpus))[0] == 0

    exit_code, out, _ = run(capsys, "evaluate", "--corpus", str(corpus), "--hypothesis-from", "baseline", "--dry-run")
    assert exit_code == 0
    assert "documents: 2\nhypotheses: 1" in out, "Only articles with a third column carry a baseline"


def test_recorded_fixtures_replay_the_run(capsys, corpus_file, tmp_path):
    fixtures = tmp_path / "recorded.jsonl"
    exit_code, _, err = run(capsys, "correct", "--corpus", corpus_file, "--output", str(tmp_path / "echo.jsonl"), "--provider", "echo",
                            "--model", "m1", "--prompts", "basic", "--record-fixtures", str(fixtures))
    assert exit_code == 0
    assert "offline provider" in err
    assert len(fixtures.read_text(encoding="utf-8").splitlines()) == 4

    results = tmp_path / "replayed.jsonl"
    exit_code, _, _ = run(capsys, "correct", "--corpus", corpus_file, "--output", str(results), "--provider", "replay", "--fixtures", str(fixtures),
                          "--model", "m1", "--prompts", "basic")
    assert exit_code == 0
    df = Experiments.load_results(results)
    assert df["error"].isna().all(), "Every request of the recorded run has a fixture"
    assert (df["erp"].dropna() == 0.0).all(), "Echoed OCR leaves the error rate unchanged"


@pytest.mark.parametrize("matching", ["greedy", "optimal"])
def test_evaluate_with_gazetteer_and_matching(capsys, corpus_file, tmp_path, matching):
    lexicon = tmp_path / "gazetteer.tsv"
    lexicon.write_text("Jim\tPER\nLondon\tLOC\nJane Austen\tPER\n", encoding="utf-8")
    output = tmp_path / "scores.jsonl"
    exit_code, _, _ = run(capsys, "evaluate", "--corpus", corpus_file, "--hypothesis-from", "gt", "--gazetteer", str(lexicon), "--matching", matching,
                          "--output", str(output))
    assert exit_code == 0
    rows = {row["doc_id"]: row for row in map(json.loads, output.read_text(encoding="utf-8").splitlines())}
    assert rows["smh-1"]["f1"] == 1.0 and rows["ncse-1"]["f1"] == 1.0


def test_unknown_matching_is_rejected(capsys, corpus_file):
    assert run(capsys, "evaluate", "--corpus", corpus_file, "--hypothesis-from", "gt", "--matching", "hungarian")[0] != 0


def test_corpus_import_warns_about_unknown_dataset(capsys, tmp_path):
    source = tmp_path / "overproof.txt"
    source.write_text("*$*OVERPROOF*$* 1\nTbe||@@||The\n", encoding="utf-8")
    exit_code, _, err = run(capsys, "corpus", "import", "--format", "overproof", "--input", str(source), "--output", str(tmp_path / "c.jsonl"),
                            "--dataset", "TIMES")
    assert exit_code == 0
    assert "'TIMES' is not one of the known datasets" in " ".join(err.split())

    _, _, err = run(capsys, "corpus", "import", "--format", "overproof", "--input", str(source), "--output", str(tmp_path / "c.jsonl"),
                    "--dataset", "SMH")
    assert "known datasets" not in err
