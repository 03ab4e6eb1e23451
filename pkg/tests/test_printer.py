import re

import pytest

from printer import Printer

printer = Printer.getInstance()


@pytest.fixture
def logfile(tmp_path):
    path = tmp_path / "clocrc.log"
    printer.set_logfile(str(path))
    yield path
    printer.set_logfile(None)


def test_singleton():
    assert Printer.getInstance() is printer
    with pytest.raises(Exception):
        Printer(printer.console)


def test_messages_are_logged_with_timestamp(logfile):
    printer.warning("Document 'smh-1' has no entities")
    printer.information("two\nlines")
    lines = logfile.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 3
    assert re.fullmatch(r"\d{4}-\d{2}-\d{2} \d{2}:\d{2}:\d{2} - Warning: Document 'smh-1' has no entities", lines[0])
    assert lines[2].endswith(" - lines")


def test_markup_in_messages_is_printed_verbatim(capsys):
    printer.error("[bold]Tbe c0unci1[/bold]")
    assert "[bold]Tbe c0unci1[/bold]" in capsys.readouterr().err


def test_hard_wrap():
    width = printer.console.width
    text = printer.handle_hard_wrap_chars("x" * (2 * width), "Error: ", "...")
    assert len("Error: " + text) == width and text.endswith("...")
    assert printer.handle_hard_wrap_chars("short", "", "...") == "short"
    assert printer.handle_hard_wrap_chars("x" * (2 * width), "", None) == "x" * (2 * width)
