"""Exception hierarchy shared by the front end, compiler and checker."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Position:
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


class ModelError(ValueError):
    """Base class for every error caused by a faulty model or property."""

    def __init__(self, message: str, pos: Position | None = None, source: str | None = None):
        self.message = message
        self.pos = pos
        self.source = source
        super().__init__(self._render())

    def _render(self) -> str:
        where = ""
        if self.source and self.pos:
            where = f"{self.source}:{self.pos}: "
        elif self.source:
            where = f"{self.source}: "
        elif self.pos:
            where = f"{self.pos}: "
        return where + self.message

    def with_source(self, source: str) -> "ModelError":
        self.source = source
        self.args = (self._render(),)
        return self


class ParseError(ModelError):
    def __init__(self, message: str, pos: Position | None = None, expected: frozenset[str] = frozenset()):
        self.expected = expected
        if expected:
            message = f"{message}; expected one of: {', '.join(sorted(expected))}"
        super().__init__(message, pos)


class TypeCheckError(ModelError):
    pass


class FeatureModelError(ModelError):
    pass


class EvaluationError(ModelError):
    pass


class CompileError(ModelError):
    pass


class CheckError(ModelError):
    pass


class ConvergenceError(CheckError):
    def __init__(self, message: str, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(message)
