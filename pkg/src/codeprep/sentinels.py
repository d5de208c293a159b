"""Special-token registry and pluggable token budgeting.

The seven sentinel tokens (surfaces and ids) are fixed at import time and
never mutated. Raw corpus text must be checked for literal occurrences of
the surface strings before it is embedded in a rendered training sample;
documents that collide are dropped upstream, never escaped.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Iterator


class SentinelError(KeyError):
    """Unknown sentinel name."""


@dataclass(frozen=True)
class SentinelToken:
    name: str
    surface: str
    id: int


_ENTRIES = (
    SentinelToken("endoftext", "<|endoftext|>", 151643),
    SentinelToken("fim_prefix", "<|fim_prefix|>", 151659),
    SentinelToken("fim_middle", "<|fim_middle|>", 151660),
    SentinelToken("fim_suffix", "<|fim_suffix|>", 151661),
    SentinelToken("fim_pad", "<|fim_pad|>", 151662),
    SentinelToken("repo_name", "<|repo_name|>", 151663),
    SentinelToken("file_sep", "<|file_sep|>", 151664),
)

# Documented constant only; we never build the vocabulary itself.
VOCAB_SIZE = 151646


class SentinelRegistry:
    """Immutable lookup table for the special tokens."""

    def __init__(self) -> None:
        self._by_name = {t.name: t for t in _ENTRIES}
        ids = [t.id for t in _ENTRIES]
        if len(set(ids)) != len(ids):
            raise ValueError("sentinel ids must be unique")

    def lookup(self, name: str) -> SentinelToken:
        try:
            return self._by_name[name]
        except KeyError:
            raise SentinelError(f"unknown sentinel name: {name!r}") from None

    def __iter__(self) -> Iterator[SentinelToken]:
        return iter(_ENTRIES)

    def __len__(self) -> int:
        return len(_ENTRIES)

    @property
    def surfaces(self) -> tuple[str, ...]:
        return tuple(t.surface for t in _ENTRIES)

    def find_collisions(self, text: str) -> list[tuple[str, int]]:
        """Every occurrence of any sentinel surface in *text*.

        Returns (token-name, byte-offset) pairs in ascending offset order.
        Offsets are byte offsets into the UTF-8 encoding of *text*.
        An empty result means the text is safe to embed verbatim.
        """
        data = text.encode("utf-8")
        hits: list[tuple[int, str]] = []
        for tok in _ENTRIES:
            needle = tok.surface.encode("utf-8")
            start = 0
            while True:
                idx = data.find(needle, start)
                if idx < 0:
                    break
                hits.append((idx, tok.name))
                start = idx + 1
        hits.sort()
        return [(name, off) for off, name in hits]

    def to_json(self) -> str:
        """Registry as a JSON document for downstream tokenizer config."""
        return json.dumps(
            [{"name": t.name, "surface": t.surface, "id": t.id} for t in _ENTRIES],
            indent=2,
        )


REGISTRY = SentinelRegistry()


def lookup(name: str) -> SentinelToken:
    return REGISTRY.lookup(name)


def find_sentinel_collisions(text: str) -> list[tuple[str, int]]:
    return REGISTRY.find_collisions(text)


class TokenBudgeter:
    """Pluggable token-count estimate used for sequence budgets.

    Modes:
      whitespace-word  - number of whitespace-separated words (default)
      byte-quarter     - ceil(utf8_bytes / 4), approximating BPE density
      external         - caller-supplied counting function
    """

    MODES = ("whitespace-word", "byte-quarter", "external")

    def __init__(self, mode: str = "whitespace-word",
                 count_fn: Callable[[str], int] | None = None) -> None:
        if mode not in self.MODES:
            raise ValueError(f"unknown budgeter mode: {mode!r}")
        if mode == "external" and count_fn is None:
            raise ValueError("external mode requires a count function")
        self.mode = mode
        self._count_fn = count_fn

    def count(self, text: str) -> int:
        if not text:
            return 0
        if self.mode == "whitespace-word":
            return len(text.split())
        if self.mode == "byte-quarter":
            return math.ceil(len(text.encode("utf-8")) / 4)
        return self._count_fn(text)  # type: ignore[misc]


# Sequence budgets documented by the training recipe; exposed as defaults.
FILE_STAGE_BUDGET = 8_192
REPO_STAGE_BUDGET = 32_768
MAX_CONTEXT_BUDGET = 131_072
