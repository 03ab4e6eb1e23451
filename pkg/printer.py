import datetime
from typing import Optional

from rich.console import Console
from rich.markup import escape


class Printer:
    """
    Singleton for all diagnostics of the harness (progress, warnings, errors), optionally mirrored to a log file.
    Output goes to standard error so that tables and data written to standard output stay machine-readable.

    Use 'getInstance()' to obtain the instance.
    """

    __instance = None

    @staticmethod
    def getInstance() -> "Printer":
        """
        Use this method to get the singleton instance of the Printer class.
        :return: Singleton instance of Printer
        """
        if Printer.__instance is None:
            Printer(Console(width=80, stderr=True))
        return Printer.__instance

    def __init__(self, console: Console):
        """
        Should normally not be called by users.

        :param console: Console all messages are printed to
        """
        if Printer.__instance is not None:
            raise Exception("Printer is a singleton but got initialized twice")

        Printer.__instance = self
        self.console = console
        self.logfile: Optional[str] = None
        self.add_timestamp_to_logfile = True

    def set_width(self, width: int) -> None:
        self.console.width = width
        return None

    def set_logfile(self, logfile: Optional[str]) -> None:
        """
        Sets the log file every message is appended to. None disables logging to a file.

        :param logfile: Path to the log file
        :return: None
        """
        self.logfile = logfile
        return None

    def get_logfile(self) -> Optional[str]:
        return self.logfile

    def handle_hard_wrap_chars(self, text: str, prefix: str, hard_wrap_chars: Optional[str]) -> str:
        """
        Truncates the text to the console width and appends hard_wrap_chars if it would not fit.

        Example:
        >>> printer = Printer.getInstance()
        >>> printer.set_width(16)
        >>> printer.handle_hard_wrap_chars("This is a test-text", "PREFIX ", "...")
        'This i...'

        :param text: Text to be printed
        :param prefix: Prefix (counts towards the width)
        :param hard_wrap_chars: Appended on truncation; None disables truncation
        :return: Adjusted text
        """
        if hard_wrap_chars is not None and len(text) + len(prefix) > self.console.width:
            text = text[:self.console.width - len(prefix) - len(hard_wrap_chars)] + hard_wrap_chars
        return text

    def _emit(self, text: str, prefix: str, color: Optional[str], hard_wrap_chars: Optional[str]) -> None:
        text = self.handle_hard_wrap_chars(text, prefix, hard_wrap_chars)
        # Messages contain user data (OCR text, paths) that must not be parsed as markup
        if color is None:
            self.console.print(f"{escape(prefix)}{escape(text)}")
        elif len(prefix) > 0:
            self.console.print(f"[{color}]{escape(prefix)}[/{color}]{escape(text)}")  # Only have prefix in color if it is set
        else:
            self.console.print(f"[{color}]{escape(text)}[/{color}]")
        self._log(f"{prefix}{text}")
        return None

    def error(self, text: str, prefix: str = "Error: ", hard_wrap_chars: Optional[str] = None) -> None:
        """
        Prints an error message in red and logs it.

        :param text: Text to be printed
        :param prefix: Prefix (default: "Error: ")
        :param hard_wrap_chars: Chars added when the text is truncated to the console width, None to never truncate
        :return: None
        """
        return self._emit(text, prefix, "red", hard_wrap_chars)

    def warning(self, text: str, prefix: str = "Warning: ", hard_wrap_chars: Optional[str] = None) -> None:
        """
        Prints a warning message in yellow and logs it.

        :param text: Text to be printed
        :param prefix: Prefix (default: "Warning: ")
        :param hard_wrap_chars: Chars added when the text is truncated to the console width, None to never truncate
        :return: None
        """
        return self._emit(text, prefix, "yellow", hard_wrap_chars)

    def success(self, text: str, prefix: str = "", hard_wrap_chars: Optional[str] = None) -> None:
        return self._emit(text, prefix, "green", hard_wrap_chars)

    def information(self, text: str, prefix: str = "", hard_wrap_chars: Optional[str] = None) -> None:
        return self._emit(text, prefix, None, hard_wrap_chars)

    def _log(self, text: str) -> None:
        """
        Appends the message to the log file (if one is set), one timestamped line per text line.

        :param text: The message to be logged
        :return: None
        """
        if self.logfile is not None:
            with open(self.logfile, "a", encoding="utf-8") as f:
                for line in text.splitlines():
                    if self.add_timestamp_to_logfile:
                        f.write(f"{datetime.datetime.now().strftime('%Y-%m-%d %H:%M:%S')} - {line}\n")
                    else:
                        f.write(line + "\n")
        return None

    def separator(self) -> None:
        self.console.print("-" * self.console.width, style="white")
        self._log("-" * self.console.width)
