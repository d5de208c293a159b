"""Long-context "needle" probe generation and scoring.

A short self-contained function is inserted as a standalone file at the
file boundary nearest the requested depth inside a repo-formatted context
of approximately the target token length. Scoring is binary: the
whitespace-normalized needle must occur in the whitespace-normalized
response.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

from .hashing import stable_hex
from .parsers import UnsupportedLanguageError, get_parser
from .sentinels import TokenBudgeter, find_sentinel_collisions, lookup

_REPO = lookup("repo_name").surface
_FSEP = lookup("file_sep").surface

DEFAULT_PROMPT_SUFFIX = (
    "\n# Replicate the custom helper function defined above, verbatim, "
    "at the end of the codebase:\n")

DEFAULT_NEEDLE = (
    "def magic_accumulator_of_wonders(x):\n"
    "    \"\"\"Add the magic constant 42 to x.\"\"\"\n"
    "    return x + 42\n")

DEFAULT_DEPTHS = tuple(round(i / 9, 2) for i in range(10))
DEFAULT_LENGTHS = (4_096, 8_192, 16_384, 24_576, 32_768)

NEEDLE_FILE_PATH = "needle_module.py"


class NeedleError(ValueError):
    pass


@dataclass(frozen=True)
class NeedleSpec:
    needle_source: str = DEFAULT_NEEDLE
    depth_fraction: float = 0.5
    target_length: int = 32_768
    language: str = "python"
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.depth_fraction <= 1.0:
            raise ValueError("depth_fraction must be in [0, 1]")
        if find_sentinel_collisions(self.needle_source):
            raise ValueError("needle source contains a sentinel surface")
        try:
            parser = get_parser(self.language)
        except UnsupportedLanguageError:
            return  # unregistered grammar: static validation skipped
        if not parser.check(self.needle_source).ok:
            raise ValueError("needle source fails static check")


@dataclass
class NeedleInstance:
    instance_id: str
    context: str
    prompt_suffix: str
    expected: str
    actual_depth: float
    actual_length: int
    depth_fraction: float
    target_length: int

    @property
    def prompt(self) -> str:
        return self.context + self.prompt_suffix


def _file_chunk(path: str, content: str) -> str:
    sep = "" if (not content or content.endswith("\n")) else "\n"
    return f"{_FSEP}{path}\n{content}{sep}"


def generate_instance(corpus: Sequence[tuple[str, str]], spec: NeedleSpec,
                      budgeter: TokenBudgeter | None = None,
                      repo_name: str = "haystack",
                      prompt_suffix: str = DEFAULT_PROMPT_SUFFIX,
                      ) -> NeedleInstance:
    """Assemble a probe from (path, content) pairs.

    Corpus files are concatenated in order (cycling if needed) until the
    target length is reached; the needle goes in as its own file at the
    boundary nearest depth_fraction of the target.
    """
    budgeter = budgeter or TokenBudgeter()
    corpus = [(p, c) for p, c in corpus if not find_sentinel_collisions(c)]
    if not corpus:
        raise NeedleError("no usable corpus files")
    supply = sum(budgeter.count(_file_chunk(p, c)) for p, c in corpus)
    if supply <= 0:
        raise NeedleError("corpus has no token supply")

    needle_chunk = _file_chunk(NEEDLE_FILE_PATH, spec.needle_source)
    needle_tokens = budgeter.count(needle_chunk)
    context_target = max(0, spec.target_length - needle_tokens)

    # pick file chunks round-robin until the context budget is filled
    chunks: list[str] = []
    chunk_tokens: list[int] = []
    total = budgeter.count(f"{_REPO}{repo_name}\n")
    i = 0
    guard = 0
    while total < context_target:
        p, c = corpus[i % len(corpus)]
        path = p if i < len(corpus) else f"cycle{i // len(corpus)}/{p}"
        chunk = _file_chunk(path, c)
        t = budgeter.count(chunk)
        if total + t > context_target and chunks:
            break
        chunks.append(chunk)
        chunk_tokens.append(t)
        total += t
        i += 1
        guard += 1
        if guard > 10_000_000:
            raise NeedleError("corpus cycling did not converge")

    # insertion point: file boundary nearest depth_fraction of the realized
    # total (filled context plus the needle chunk)
    want = spec.depth_fraction * (total + needle_tokens)
    best_idx, best_err, running = 0, None, budgeter.count(f"{_REPO}{repo_name}\n")
    for idx in range(len(chunks) + 1):
        err = abs(running - want)
        if best_err is None or err < best_err:
            best_idx, best_err = idx, err
        if idx < len(chunks):
            running += chunk_tokens[idx]

    assembled = chunks[:best_idx] + [needle_chunk] + chunks[best_idx:]
    context = f"{_REPO}{repo_name}\n" + "".join(assembled)
    tokens_before = budgeter.count(
        f"{_REPO}{repo_name}\n" + "".join(chunks[:best_idx]))
    actual_length = budgeter.count(context)
    actual_depth = tokens_before / actual_length if actual_length else 0.0

    if context.count(spec.needle_source) != 1:
        raise NeedleError("needle does not occur exactly once in context")

    return NeedleInstance(
        instance_id=stable_hex(repo_name, spec.depth_fraction,
                               spec.target_length, spec.seed, spec.needle_source),
        context=context,
        prompt_suffix=prompt_suffix,
        expected=spec.needle_source,
        actual_depth=actual_depth,
        actual_length=actual_length,
        depth_fraction=spec.depth_fraction,
        target_length=spec.target_length,
    )


def _normalize_ws(text: str) -> str:
    return " ".join(text.split())


def score_response(instance: NeedleInstance, response: str) -> int:
    """1 iff the whitespace-normalized needle occurs in the response."""
    return 1 if _normalize_ws(instance.expected) in _normalize_ws(response) else 0


@dataclass
class NeedleGrid:
    instances: list[NeedleInstance] = field(default_factory=list)

    def results_csv(self, scores: dict[str, int]) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["depth", "length", "score"])
        for inst in self.instances:
            writer.writerow([inst.depth_fraction, inst.target_length,
                             scores.get(inst.instance_id, 0)])
        return buf.getvalue()


def generate_grid(corpus: Sequence[tuple[str, str]],
                  depths: Sequence[float] = DEFAULT_DEPTHS,
                  lengths: Sequence[int] = DEFAULT_LENGTHS,
                  needle: str = DEFAULT_NEEDLE,
                  seed: int = 0,
                  budgeter: TokenBudgeter | None = None,
                  language: str = "python") -> NeedleGrid:
    """|depths| x |lengths| probe instances, deterministic per seed."""
    from .sentinels import MAX_CONTEXT_BUDGET
    grid = NeedleGrid()
    for length in lengths:
        if length > MAX_CONTEXT_BUDGET:
            raise NeedleError(f"length {length} exceeds the {MAX_CONTEXT_BUDGET} "
                              "token ceiling")
        for depth in depths:
            spec = NeedleSpec(needle_source=needle, depth_fraction=depth,
                              target_length=length, language=language, seed=seed)
            grid.instances.append(generate_instance(corpus, spec, budgeter))
    return grid
