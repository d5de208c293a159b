"""Fill-in-the-middle sample construction and the file-level wire format.

A document is decomposed into (prefix, middle, suffix) character spans,
either uniformly at random or at a grammar-derived basic logic block, and
rendered in PSM order:

    <|fim_prefix|>{prefix}<|fim_suffix|>{suffix}<|fim_middle|>{middle}<|endoftext|>

Documents that skip FIM render as plain next-token text followed by the
end token. All span decisions derive from (seed, doc_id) only, so output
is identical regardless of worker count or processing order.
"""

from __future__ import annotations

from dataclasses import dataclass

from .hashing import derive_rng, derive_unit
from .ingest import SourceDocument
from .parsers import (GrammarParser, ParseFailure, UnsupportedLanguageError,
                      get_parser)
from .sentinels import find_sentinel_collisions, lookup

ORIGIN_RANDOM = "random-span"
ORIGIN_AST = "ast-block"
ORIGIN_PLAIN = "plain"

_PRE = lookup("fim_prefix").surface
_SUF = lookup("fim_suffix").surface
_MID = lookup("fim_middle").surface
_END = lookup("endoftext").surface


class FimRenderError(ValueError):
    """Sample contains a sentinel surface and cannot be rendered."""


class FimParseError(ValueError):
    """Rendered text violates the file-level FIM format."""


@dataclass(frozen=True)
class FimSample:
    prefix: str
    middle: str
    suffix: str
    origin: str
    source_doc_id: str = ""
    ast_fallback: bool = False  # AST mode requested but random span used

    @property
    def content(self) -> str:
        return self.prefix + self.middle + self.suffix


@dataclass(frozen=True)
class SpanPolicy:
    fim_rate: float = 0.5
    min_middle_chars: int = 1
    max_middle_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.fim_rate <= 1.0:
            raise ValueError("fim_rate must be in [0, 1]")
        if self.min_middle_chars < 1:
            raise ValueError("min_middle_chars must be >= 1")
        if not 0.0 < self.max_middle_fraction <= 1.0:
            raise ValueError("max_middle_fraction must be in (0, 1]")


def _plain(doc: SourceDocument) -> FimSample:
    return FimSample(prefix=doc.content, middle="", suffix="",
                     origin=ORIGIN_PLAIN, source_doc_id=doc.doc_id)


def _fim_decision(doc: SourceDocument, policy: SpanPolicy) -> bool:
    return derive_unit(policy.seed, "fim-rate", doc.doc_id) < policy.fim_rate


def legal_middle_splits(length: int, policy: SpanPolicy) -> list[tuple[int, int]]:
    """All (start, end) with min_middle_chars <= end-start <= max fraction."""
    max_len = int(policy.max_middle_fraction * length)
    out = []
    for size in range(policy.min_middle_chars, max_len + 1):
        for start in range(0, length - size + 1):
            out.append((start, start + size))
    return out


def select_span_random(doc: SourceDocument, policy: SpanPolicy,
                       force: bool = False) -> FimSample:
    """Uniform random (start, end) over legal middles, rate-gated.

    With force=True the fim_rate gate is skipped; used where the caller
    has already decided this document is a FIM target.
    """
    content = doc.content
    n = len(content)
    max_middle = int(policy.max_middle_fraction * n)
    if max_middle < policy.min_middle_chars:
        return _plain(doc)
    if not force and not _fim_decision(doc, policy):
        return _plain(doc)
    rng = derive_rng(policy.seed, "fim-span", doc.doc_id)
    size = rng.randint(policy.min_middle_chars, max_middle)
    start = rng.randint(0, n - size)
    end = start + size
    return FimSample(prefix=content[:start], middle=content[start:end],
                     suffix=content[end:], origin=ORIGIN_RANDOM,
                     source_doc_id=doc.doc_id)


def select_span_ast(doc: SourceDocument, policy: SpanPolicy,
                    parser: GrammarParser | None = None) -> FimSample:
    """Middle = one basic logic block (seeded-uniform over candidates).

    Falls back to select_span_random when the parse fails or no candidate
    blocks exist; the fallback is recorded on the sample. An unregistered
    language raises UnsupportedLanguageError from get_parser.
    """
    if parser is None:
        parser = get_parser(doc.language)
    if not _fim_decision(doc, policy):
        return _plain(doc)
    try:
        spans = parser.block_spans(doc.content)
    except ParseFailure:
        spans = []
    spans = [s for s in spans if s.end - s.start >= policy.min_middle_chars]
    if not spans:
        fallback = select_span_random(doc, policy)
        return FimSample(prefix=fallback.prefix, middle=fallback.middle,
                         suffix=fallback.suffix, origin=fallback.origin,
                         source_doc_id=doc.doc_id, ast_fallback=True)
    rng = derive_rng(policy.seed, "fim-ast-span", doc.doc_id)
    chosen = spans[rng.randrange(len(spans))]
    content = doc.content
    return FimSample(prefix=content[:chosen.start],
                     middle=content[chosen.start:chosen.end],
                     suffix=content[chosen.end:],
                     origin=ORIGIN_AST, source_doc_id=doc.doc_id)


def render_file_fim(sample: FimSample) -> str:
    """Bit-exact file-level rendering; raises on sentinel collisions."""
    for part in (sample.prefix, sample.middle, sample.suffix):
        hits = find_sentinel_collisions(part)
        if hits:
            raise FimRenderError(f"sentinel collision: {hits[0]}")
    if sample.origin == ORIGIN_PLAIN:
        return sample.prefix + _END
    return _PRE + sample.prefix + _SUF + sample.suffix + _MID + sample.middle + _END


def parse_file_fim(text: str) -> FimSample:
    """Inverse of render_file_fim; origin information beyond plain/FIM is
    not recoverable from the wire format, so FIM parses as random-span."""
    if not text.endswith(_END):
        raise FimParseError("missing end-of-text sentinel")
    body = text[:-len(_END)]
    if not body.startswith(_PRE):
        for surface, label in ((_MID, "fim_middle"), (_SUF, "fim_suffix")):
            if surface in body:
                raise FimParseError(f"{label} sentinel without fim_prefix")
        return FimSample(prefix=body, middle="", suffix="", origin=ORIGIN_PLAIN)
    rest = body[len(_PRE):]
    suf_idx = rest.find(_SUF)
    if suf_idx < 0:
        raise FimParseError("missing fim_suffix sentinel")
    mid_idx = rest.find(_MID, suf_idx + len(_SUF))
    if mid_idx < 0:
        raise FimParseError("missing fim_middle sentinel")
    prefix = rest[:suf_idx]
    suffix = rest[suf_idx + len(_SUF):mid_idx]
    middle = rest[mid_idx + len(_MID):]
    return FimSample(prefix=prefix, middle=middle, suffix=suffix,
                     origin=ORIGIN_RANDOM)


def build_sample(doc: SourceDocument, policy: SpanPolicy,
                 ast_mode: bool = False) -> FimSample:
    """Span selection entry point used by the pipeline.

    AST mode applies only to languages with a registered parser; other
    documents take the random-span path.
    """
    if ast_mode:
        try:
            return select_span_ast(doc, policy)
        except UnsupportedLanguageError:
            pass
    return select_span_random(doc, policy)
