"""Instruction-data gating: fenced-block extraction, static syntax
checking, language classification, and checklist scoring.

The two native criteria (code-exist, code-correctness) are computed here;
the seven judgment criteria come from external score files keyed by
sample_id. The final score is the plain weighted sum over all nine.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .hashing import derive_unit
from .parsers import UnsupportedLanguageError, get_parser

NO_LANGUAGE = "No Programming Language"

# Canonical nine checklist criteria, in order.
CRITERIA = (
    "consistency",
    "relevance",
    "difficulty",
    "code-exist",
    "code-correctness",
    "best-practices",
    "clarity",
    "comments",
    "educational-value",
)

# Mainstream languages; everything else is long-tail.
MAINSTREAM_LANGUAGES = frozenset({
    "python", "cpp", "java", "php", "typescript", "csharp", "shell", "javascript",
})

_CODE_KEYWORDS = re.compile(
    r"\b(def|class|return|import|function|var|const|public|void|int|"
    r"printf|println|lambda|struct|impl|fn)\b")
_FENCE_RE = re.compile(r"^```([^\n`]*)$", re.MULTILINE)

# Info-string aliases normalized to the tags used elsewhere in the pipeline.
_TAG_ALIASES = {
    "py": "python", "python3": "python",
    "js": "javascript", "node": "javascript",
    "ts": "typescript",
    "c++": "cpp", "cxx": "cpp",
    "c#": "csharp", "cs": "csharp",
    "sh": "shell", "bash": "shell", "zsh": "shell",
    "rb": "ruby",
    "golang": "go",
}


@dataclass
class InstructionSample:
    sample_id: str
    question: str
    answer: str
    code_blocks: list[tuple[str, str]] = field(default_factory=list)
    language_label: str = NO_LANGUAGE
    warnings: list[str] = field(default_factory=list)


def extract_code_blocks(text: str,
                        warnings: list[str] | None = None) -> list[tuple[str, str]]:
    """Triple-backtick fenced blocks with their info-string tags.

    Fences pair greedily in document order; nesting is not supported. An
    unlabeled fence gets tag "unknown"; a trailing unclosed fence is
    ignored with a warning.
    """
    blocks: list[tuple[str, str]] = []
    fences = list(_FENCE_RE.finditer(text))
    i = 0
    while i + 1 < len(fences):
        opener, closer = fences[i], fences[i + 1]
        tag = opener.group(1).strip().split()[0].lower() if opener.group(1).strip() else "unknown"
        tag = _TAG_ALIASES.get(tag, tag)
        snippet = text[opener.end() + 1:closer.start()]
        if snippet.endswith("\n"):
            snippet = snippet[:-1]
        blocks.append((tag, snippet))
        i += 2
    if i < len(fences) and warnings is not None:
        warnings.append("unclosed-fence")
    return blocks


def build_sample(sample_id: str, question: str, answer: str) -> InstructionSample:
    sample = InstructionSample(sample_id=sample_id, question=question, answer=answer)
    sample.code_blocks = (extract_code_blocks(question, sample.warnings)
                          + extract_code_blocks(answer, sample.warnings))
    sample.language_label = classify_language(sample)
    return sample


@dataclass(frozen=True)
class StaticCheckResult:
    status: str  # "ok" | "reject" | "unsupported"
    error_node_count: int = 0


def static_check(snippet: str, language: str) -> StaticCheckResult:
    """ok iff the parse tree has zero error nodes."""
    try:
        parser = get_parser(language)
    except UnsupportedLanguageError:
        return StaticCheckResult(status="unsupported")
    result = parser.check(snippet)
    if result.ok:
        return StaticCheckResult(status="ok")
    return StaticCheckResult(status="reject", error_node_count=result.error_node_count)


def classify_language(sample: InstructionSample,
                      keyword_density_threshold: float = 0.05) -> str:
    """Majority tag over code blocks; keyword-density fallback for
    fence-less samples; else the no-language tag."""
    votes: dict[str, int] = {}
    for tag, _ in sample.code_blocks:
        if tag != "unknown":
            votes[tag] = votes.get(tag, 0) + 1
    if votes:
        return max(sorted(votes), key=lambda t: votes[t])
    if sample.code_blocks:
        return "unknown"
    text = sample.question + "\n" + sample.answer
    words = text.split()
    if words:
        density = len(_CODE_KEYWORDS.findall(text)) / len(words)
        if density > keyword_density_threshold:
            return "unknown"
    return NO_LANGUAGE


def checklist_score(scores: Iterable[float], weights: Iterable[float]) -> float:
    """Exact weighted sum over paired criteria scores."""
    scores, weights = list(scores), list(weights)
    if len(scores) != len(weights):
        raise ValueError(f"length mismatch: {len(scores)} scores vs "
                         f"{len(weights)} weights")
    if any(w < 0 for w in weights):
        raise ValueError("weights must be non-negative")
    return sum(w * s for w, s in zip(weights, scores))


@dataclass
class GatePolicy:
    no_code_keep_prob: float = 0.1       # p: keep-probability for no-code samples
    long_tail_keep_prob: float = 1.0     # q: keep-probability for long-tail languages
    min_checklist_total: float | None = None
    require_static_check: bool = False
    weights: tuple[float, ...] = (1.0,) * len(CRITERIA)
    seed: int = 0


def _external_score_row(external: dict[str, dict[str, float]] | None,
                        sample_id: str) -> dict[str, float]:
    if external is None:
        return {}
    return external.get(sample_id, {})


def score_sample(sample: InstructionSample, policy: GatePolicy,
                 external_scores: dict[str, dict[str, float]] | None = None,
                 ) -> tuple[float, dict[str, float]]:
    """Per-criterion scores for one sample plus the weighted total.

    code-exist and code-correctness are computed natively; the judgment
    criteria default to 0 unless supplied externally.
    """
    row = _external_score_row(external_scores, sample.sample_id)
    per: dict[str, float] = {}
    for name in CRITERIA:
        if name == "code-exist":
            per[name] = 1.0 if sample.code_blocks else 0.0
        elif name == "code-correctness":
            checks = [static_check(snippet, tag) for tag, snippet in sample.code_blocks]
            decided = [c for c in checks if c.status != "unsupported"]
            per[name] = (sum(c.status == "ok" for c in decided) / len(decided)
                         if decided else 0.0)
        else:
            per[name] = float(row.get(name, 0.0))
    total = checklist_score([per[n] for n in CRITERIA], policy.weights)
    return total, per


def gate_instruction_corpus(stream: Iterable[InstructionSample],
                            policy: GatePolicy,
                            external_scores: dict[str, dict[str, float]] | None = None,
                            drop_log: list[dict] | None = None,
                            ) -> Iterator[InstructionSample]:
    """Seeded, deterministic gate; drop reasons are logged per sample."""
    def drop(sample: InstructionSample, reason: str) -> None:
        if drop_log is not None:
            drop_log.append({"sample_id": sample.sample_id, "reason": reason})

    for sample in stream:
        if sample.language_label == NO_LANGUAGE:
            if derive_unit(policy.seed, "gate-no-code", sample.sample_id) >= policy.no_code_keep_prob:
                drop(sample, "no-code")
                continue
        elif sample.language_label not in MAINSTREAM_LANGUAGES:
            if derive_unit(policy.seed, "gate-long-tail", sample.sample_id) >= policy.long_tail_keep_prob:
                drop(sample, "long-tail-language")
                continue
        if policy.require_static_check:
            rejected = any(
                static_check(snippet, tag).status == "reject"
                for tag, snippet in sample.code_blocks)
            if rejected:
                drop(sample, "static-check")
                continue
        if policy.min_checklist_total is not None:
            total, _ = score_sample(sample, policy, external_scores)
            if total < policy.min_checklist_total:
                drop(sample, "checklist-below-threshold")
                continue
        yield sample
