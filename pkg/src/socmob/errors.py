"""Exception hierarchy shared by all modules."""


class SocmobError(Exception):
    """Base class for all library errors."""


class NoData(SocmobError):
    """An operation received an empty history or dataset."""


class ParseError(SocmobError):
    """A malformed row in an input file.

    Attributes:
        line_no: 1-based line number of the offending row, when known.
    """

    def __init__(self, message: str, line_no: int | None = None):
        super().__init__(message if line_no is None else f"line {line_no}: {message}")
        self.line_no = line_no


class IntegrityError(SocmobError):
    """Inconsistent references between loaded records."""


class InsufficientSpan(SocmobError):
    """The observation period is too short for the requested measure."""


class UnknownNode(SocmobError):
    """A graph query referenced a user that is not in the graph."""


class DegenerateInput(SocmobError):
    """A statistic is undefined for the given input (e.g. constant series)."""


class ModelEmpty(SocmobError):
    """A prediction was requested from an untrained model."""


class ConfigError(SocmobError):
    """A configuration parameter is out of its valid range."""


class UnsupportedScheme(SocmobError):
    """A weighting scheme that is named but deliberately not implemented."""
