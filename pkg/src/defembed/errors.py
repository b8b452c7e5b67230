"""Exception types shared across the package."""


class DefembedError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(DefembedError):
    """A corpus, embedding or checkpoint file violates its format.

    Carries the offending line number when one is known.
    """

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix += str(path)
        if line is not None:
            prefix += f":{line}"
        super().__init__(f"{prefix}: {message}" if prefix else message)


class NoKnownTokensError(DefembedError):
    """An input phrase contains no tokens known to the encoder or store."""
