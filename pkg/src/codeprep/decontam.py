"""Benchmark decontamination by word-level n-gram overlap.

A training document is removed when any window of n consecutive
normalized words also occurs in a benchmark test document (n = 10 by
default). Windows are fingerprinted with a 64-bit hash; every hash hit is
verified against the actual words, so reported matches are exact.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .ingest import SourceDocument

DEFAULT_N = 10

_WORD_RE = re.compile(r"\w+", re.UNICODE)


def normalize_words(text: str) -> list[str]:
    """Lowercase; maximal runs of letters/digits/underscore are words."""
    return _WORD_RE.findall(text.lower())


def _fingerprint(window: tuple[str, ...]) -> int:
    joined = "\x1f".join(window).encode("utf-8")
    return int.from_bytes(hashlib.blake2b(joined, digest_size=8).digest(), "big")


@dataclass
class NGramIndex:
    n: int = DEFAULT_N
    # fingerprint -> list of (benchmark-name, exact window words) for the
    # verification pass; hash collisions never produce a false flag.
    entries: dict[int, list[tuple[str, tuple[str, ...]]]] = field(default_factory=dict)

    def __len__(self) -> int:
        return sum(len(v) for v in self.entries.values())

    @property
    def fingerprints(self) -> set[int]:
        return set(self.entries)

    def add_document(self, text: str, benchmark: str) -> None:
        words = normalize_words(text)
        for i in range(len(words) - self.n + 1):
            window = tuple(words[i:i + self.n])
            bucket = self.entries.setdefault(_fingerprint(window), [])
            if (benchmark, window) not in bucket:
                bucket.append((benchmark, window))


@dataclass
class DecontamReport:
    doc_id: str
    matches: list[tuple[str, int]] = field(default_factory=list)  # (benchmark, word offset)

    @property
    def flagged(self) -> bool:
        return bool(self.matches)


def build_index(test_docs: Iterable[tuple[str, str]], n: int = DEFAULT_N) -> NGramIndex:
    """Index all length-n word windows of (benchmark-name, text) pairs."""
    if n < 1:
        raise ValueError("n must be >= 1")
    index = NGramIndex(n=n)
    for benchmark, text in test_docs:
        index.add_document(text, benchmark)
    return index


def scan(doc: SourceDocument, index: NGramIndex) -> DecontamReport:
    """Report every window of *doc* whose verified words are indexed."""
    words = normalize_words(doc.content)
    report = DecontamReport(doc_id=doc.doc_id)
    n = index.n
    for i in range(len(words) - n + 1):
        window = tuple(words[i:i + n])
        bucket = index.entries.get(_fingerprint(window))
        if not bucket:
            continue
        for benchmark, indexed in bucket:
            if indexed == window:
                report.matches.append((benchmark, i))
    return report


def filter_corpus(stream: Iterable[SourceDocument], index: NGramIndex,
                  removal_log: list[dict] | None = None,
                  ) -> Iterator[SourceDocument]:
    """Input minus flagged documents, order preserved."""
    for doc in stream:
        report = scan(doc, index)
        if report.flagged:
            if removal_log is not None:
                for benchmark, offset in report.matches:
                    removal_log.append({"doc_id": doc.doc_id,
                                        "benchmark": benchmark,
                                        "offset": offset})
            continue
        yield doc
