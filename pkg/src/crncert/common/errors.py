"""Exception hierarchy for crncert."""
from typing import Optional


class CrncertError(Exception):
    """Base class for all crncert errors."""


class ConfigError(CrncertError):
    """Invalid configuration value."""


class NetworkError(CrncertError):
    """Malformed network (bad reference, duplicate name, inconsistent reverse link)."""


class NetworkParseError(CrncertError):
    """Syntax or semantic error in network source text."""

    def __init__(self, message: str, line: int, column: Optional[int] = None):
        self.message = message
        self.line = line
        self.column = column
        location = f"line {line}" if column is None else f"line {line}, column {column}"
        super().__init__(f"{location}: {message}")


class ModificationError(CrncertError):
    """A modification is not applicable to the given network."""


class MinorBudgetExceeded(CrncertError):
    """The Cauchy-Binet expansion would exceed the configured pair budget."""

    def __init__(self, pairs: int, cap: int):
        self.pairs = pairs
        self.cap = cap
        super().__init__(
            f"essential determinant needs {pairs} (I, J) minor pairs, cap is {cap}; "
            "use the reduced Jacobian determinant instead"
        )
