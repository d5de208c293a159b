"""Grammar-based parsing backends for static checking and block-span
extraction.

Two built-in grammars ship: Python (stdlib ast) and JSON. Additional
languages register through `register_parser`; callers asking for an
unregistered language get UnsupportedLanguageError so their own policy
decides keep/drop/fallback.
"""

from __future__ import annotations

import ast
import json
from dataclasses import dataclass
from typing import Protocol


class UnsupportedLanguageError(ValueError):
    """No parser registered for the requested language."""


class ParseFailure(ValueError):
    """Content could not be parsed at all (block extraction only)."""


@dataclass(frozen=True)
class CheckResult:
    ok: bool
    error_node_count: int = 0


@dataclass(frozen=True)
class BlockSpan:
    """Character span [start, end) of one basic logic block."""
    start: int
    end: int
    kind: str
    depth: int

    def text(self, content: str) -> str:
        return content[self.start:self.end]


class GrammarParser(Protocol):
    language: str

    def check(self, snippet: str) -> CheckResult: ...

    def block_spans(self, content: str) -> list[BlockSpan]: ...


def _line_starts(content: str) -> list[int]:
    starts = [0]
    for i, ch in enumerate(content):
        if ch == "\n":
            starts.append(i + 1)
    return starts


class PythonParser:
    """Python grammar via the stdlib ast module.

    The parser is all-or-nothing: a SyntaxError counts as one error node.
    Block candidates are function bodies, loop bodies, conditional
    branches, and expression statements, at every nesting depth.
    """

    language = "python"

    def check(self, snippet: str) -> CheckResult:
        try:
            ast.parse(snippet)
        except (SyntaxError, ValueError, MemoryError, RecursionError):
            return CheckResult(ok=False, error_node_count=1)
        return CheckResult(ok=True)

    def _body_span(self, body: list[ast.stmt], starts: list[int]) -> tuple[int, int] | None:
        if not body:
            return None
        first, last = body[0], body[-1]
        if last.end_lineno is None or last.end_col_offset is None:
            return None
        start = starts[first.lineno - 1] + first.col_offset
        end = starts[last.end_lineno - 1] + last.end_col_offset
        return (start, end)

    def block_spans(self, content: str) -> list[BlockSpan]:
        try:
            tree = ast.parse(content)
        except (SyntaxError, ValueError, MemoryError, RecursionError) as exc:
            raise ParseFailure(str(exc)) from exc
        starts = _line_starts(content)
        spans: list[BlockSpan] = []

        def visit(node: ast.AST, depth: int) -> None:
            if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
                span = self._body_span(node.body, starts)
                if span:
                    spans.append(BlockSpan(*span, kind="function-body", depth=depth))
            elif isinstance(node, (ast.For, ast.AsyncFor, ast.While)):
                span = self._body_span(node.body, starts)
                if span:
                    spans.append(BlockSpan(*span, kind="loop-body", depth=depth))
            elif isinstance(node, ast.If):
                span = self._body_span(node.body, starts)
                if span:
                    spans.append(BlockSpan(*span, kind="if-branch", depth=depth))
                span = self._body_span(node.orelse, starts)
                if span:
                    spans.append(BlockSpan(*span, kind="else-branch", depth=depth))
            elif isinstance(node, ast.Expr) and node.end_lineno is not None:
                start = starts[node.lineno - 1] + node.col_offset
                end = starts[node.end_lineno - 1] + node.end_col_offset
                spans.append(BlockSpan(start, end, kind="expression-statement", depth=depth))
            for child in ast.iter_child_nodes(node):
                visit(child, depth + 1)

        visit(tree, 0)
        spans.sort(key=lambda s: (s.start, s.end, s.kind))
        return spans


class JsonParser:
    """JSON grammar; static checking only, no block candidates."""

    language = "json"

    def check(self, snippet: str) -> CheckResult:
        try:
            json.loads(snippet)
        except (json.JSONDecodeError, RecursionError):
            return CheckResult(ok=False, error_node_count=1)
        return CheckResult(ok=True)

    def block_spans(self, content: str) -> list[BlockSpan]:
        if not self.check(content).ok:
            raise ParseFailure("invalid JSON")
        return []


_PARSERS: dict[str, GrammarParser] = {}


def register_parser(parser: GrammarParser) -> None:
    _PARSERS[parser.language] = parser


def get_parser(language: str) -> GrammarParser:
    try:
        return _PARSERS[language]
    except KeyError:
        raise UnsupportedLanguageError(
            f"no parser registered for language {language!r}") from None


def supported_languages() -> tuple[str, ...]:
    return tuple(sorted(_PARSERS))


register_parser(PythonParser())
register_parser(JsonParser())
