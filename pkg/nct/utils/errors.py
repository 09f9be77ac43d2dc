from __future__ import annotations
from typing import Iterable, List, Tuple


class ConfigError(ValueError):
    """Invalid run configuration; carries one message per offending field path."""

    def __init__(self, errors: Iterable[Tuple[str, str]]):
        self.errors: List[Tuple[str, str]] = list(errors)
        lines = [f"{path or '<document>'}: {msg}" for path, msg in self.errors]
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))

    @classmethod
    def at(cls, path: str, message: str) -> "ConfigError":
        return cls([(path, message)])


class NumericError(RuntimeError):
    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class DomainError(NumericError, ValueError):
    pass


class ModelError(NumericError):
    pass
