"""Exception hierarchy shared by all biaslens modules."""

from __future__ import annotations


class BiasLensError(Exception):
    """Base class for every error raised by the package."""


class ParseError(BiasLensError, ValueError):
    """A malformed input line. ``line`` is 1-based."""

    def __init__(self, line: int, message: str):
        self.line = line
        self.detail = message
        super().__init__(f"line {line}: {message}")


class UnknownActionLabel(ParseError):
    pass


class UnknownGenderLabel(ParseError):
    pass


class UnknownAgeLabel(ParseError):
    pass


class MissingField(ParseError):
    pass


class MalformedRecord(ParseError):
    """Line is not valid JSON / CSV, or a field has the wrong type."""


class DuplicateArticle(ParseError):
    pass


class EmptyDataset(BiasLensError):
    pass


class EmptyInput(BiasLensError, ValueError):
    pass


class LengthMismatch(BiasLensError, ValueError):
    pass


class ZeroVariance(BiasLensError, ValueError):
    def __init__(self, which: str, message: str | None = None):
        self.which = which
        super().__init__(message or f"{which} has zero variance")


class ZeroVarianceX(ZeroVariance):
    def __init__(self, message: str | None = None):
        super().__init__("x", message or "x has zero variance; regression slope is undefined")


class InsufficientData(BiasLensError, ValueError):
    pass


class UnknownKeyword(BiasLensError, KeyError):
    def __str__(self) -> str:
        return f"unknown keyword: {self.args[0]!r}"


class ConfigInvalid(BiasLensError, ValueError):
    """Invalid configuration. ``problems`` maps field name to diagnostic."""

    def __init__(self, problems: dict[str, str]):
        self.problems = dict(problems)
        detail = "; ".join(f"{k}: {v}" for k, v in self.problems.items())
        super().__init__(f"invalid config: {detail}")
