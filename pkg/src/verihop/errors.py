"""Exception types shared across the package.

Everything that stems from bad data or bad files derives from DataError so
the CLI can map it to a single exit code; usage errors are argparse's job.
"""


class DataError(Exception):
    """Malformed, inconsistent, or missing data."""


class ParseError(DataError):
    """A line or record could not be parsed.

    Carries the source path and 1-based line number when known.
    """

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        loc = ""
        if path is not None:
            loc = f"{path}:" if line is None else f"{path}:{line}:"
        super().__init__(f"{loc} {message}" if loc else message)
        self.path = path
        self.line = line


class IngestError(DataError):
    """Corpus or claim ingestion violated an invariant (e.g. duplicate doc id)."""


class NotFoundError(DataError):
    """A sentence address did not resolve against the corpus."""

    def __init__(self, doc_id: str, sent_index: int):
        super().__init__(f"sentence not found: {doc_id}::{sent_index}")
        self.doc_id = doc_id
        self.sent_index = sent_index


class FormatError(DataError):
    """A binary artifact has the wrong magic, version, or layout."""


class DimensionError(DataError):
    """Vector dimensions do not line up."""
