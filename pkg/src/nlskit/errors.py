"""Exception hierarchy shared across the toolkit."""


class NlskitError(Exception):
    """Base class for all toolkit errors."""


class ParseError(NlskitError):
    """A manifest or metadata row could not be parsed.

    Carries enough context (file, line, column) to locate the offending
    cell in the source file.
    """

    def __init__(self, path, line, column, message):
        self.path = str(path)
        self.line = line
        self.column = column
        super().__init__(f"{self.path}:{line}:{column}: {message}")


class ReferentialError(NlskitError):
    """An utterance references a session absent from the metadata."""


class DuplicationError(NlskitError):
    """A manifest contains a repeated utterance id."""


class FormatError(NlskitError):
    """A binary file does not conform to its declared format."""


class DataError(NlskitError):
    """Well-formed input with invalid content (non-finite values, ...)."""


class TrainingError(NlskitError):
    """Training cannot proceed (e.g. a single-class dataset)."""
