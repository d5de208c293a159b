"""Repository-level sequence packing under a token budget.

A packed sequence renders as:

    <|repo_name|>{repo}\n
    <|file_sep|>{path}\n{content}   (per file; "\n" added only when the
                                     content lacks a trailing newline)
    ...<|endoftext|>

The optional repo-level FIM variant renders the final file's content as a
(prefix, suffix, middle) triplet instead of verbatim bytes.
"""

from __future__ import annotations

import heapq
import re
from dataclasses import dataclass, field

from .fim import FimSample, SpanPolicy, select_span_random
from .ingest import RepoBundle, SourceDocument
from .sentinels import TokenBudgeter, find_sentinel_collisions, lookup

_REPO = lookup("repo_name").surface
_FSEP = lookup("file_sep").surface
_END = lookup("endoftext").surface
_PRE = lookup("fim_prefix").surface
_SUF = lookup("fim_suffix").surface
_MID = lookup("fim_middle").surface

ORDER_STRATEGIES = ("path-lex", "dependency-first")


class PackError(ValueError):
    pass


@dataclass
class PackedSequence:
    repo_name: str
    included_paths: list[str]
    rendered: str
    approx_tokens: int
    fim_applied: bool = False
    truncated_paths: list[str] = field(default_factory=list)


def _file_chunk(path: str, content: str, last: bool) -> str:
    sep = "" if (not content or content.endswith("\n") or last) else "\n"
    return f"{_FSEP}{path}\n{content}{sep}"


def _render(repo_name: str, files: list[tuple[str, str]]) -> str:
    parts = [f"{_REPO}{repo_name}\n"]
    for i, (path, content) in enumerate(files):
        parts.append(_file_chunk(path, content, last=(i == len(files) - 1)))
    parts.append(_END)
    return "".join(parts)


def _truncate_to_budget(repo_name: str, path: str, content: str,
                        budget: int, budgeter: TokenBudgeter) -> str:
    """Largest line-boundary prefix of *content* whose lone-file rendering
    fits the budget. May be empty."""
    lines = content.splitlines(keepends=True)
    lo, hi = 0, len(lines)
    while lo < hi:
        mid = (lo + hi + 1) // 2
        candidate = "".join(lines[:mid])
        if budgeter.count(_render(repo_name, [(path, candidate)])) <= budget:
            lo = mid
        else:
            hi = mid - 1
    return "".join(lines[:lo])


def pack_repo(bundle: RepoBundle, budget: int, budgeter: TokenBudgeter,
              warnings: list[dict] | None = None) -> list[PackedSequence]:
    """Pack bundle files, in order, into budget-bounded sequences.

    A file that would overflow the current sequence starts a new one; a
    file too large for an empty sequence is truncated at a line boundary
    and logged.
    """
    if not bundle.files:
        raise PackError(f"empty bundle for repo {bundle.repo_name!r}")
    header_cost = budgeter.count(_render(bundle.repo_name, []))
    if budget <= header_cost:
        raise PackError(f"budget {budget} does not cover header overhead")

    sequences: list[PackedSequence] = []
    current: list[tuple[str, str]] = []
    truncated: list[str] = []

    def flush() -> None:
        nonlocal current, truncated
        if not current:
            return
        rendered = _render(bundle.repo_name, current)
        sequences.append(PackedSequence(
            repo_name=bundle.repo_name,
            included_paths=[p for p, _ in current],
            rendered=rendered,
            approx_tokens=budgeter.count(rendered),
            truncated_paths=truncated,
        ))
        current, truncated = [], []

    for doc in bundle.files:
        path, content = doc.path, doc.content
        if budgeter.count(_render(bundle.repo_name, current + [(path, content)])) <= budget:
            current.append((path, content))
            continue
        flush()
        if budgeter.count(_render(bundle.repo_name, [(path, content)])) <= budget:
            current.append((path, content))
            continue
        kept = _truncate_to_budget(bundle.repo_name, path, content, budget, budgeter)
        if warnings is not None:
            warnings.append({"repo": bundle.repo_name, "path": path,
                             "warning": "truncated-to-budget",
                             "kept_bytes": len(kept.encode("utf-8"))})
        current.append((path, kept))
        truncated.append(path)
        flush()
    flush()
    return sequences


def render_repo_fim(bundle: RepoBundle, target_path: str,
                    span_policy: SpanPolicy, budgeter: TokenBudgeter,
                    budget: int,
                    sample: FimSample | None = None) -> PackedSequence:
    """One sequence whose final file carries a FIM triplet.

    The target must be the bundle's last file. Earlier files are kept as
    context working backwards from the target until the budget is spent.
    A precomputed *sample* overrides the seeded span selection; it must
    reconstruct the target's content.
    """
    if not bundle.files or bundle.files[-1].path != target_path:
        raise PackError(f"FIM target {target_path!r} must be the last file "
                        f"of repo {bundle.repo_name!r}")
    target = bundle.files[-1]
    for doc in bundle.files:
        hits = find_sentinel_collisions(doc.content)
        if hits:
            raise PackError(f"sentinel collision in {doc.path!r}: {hits[0]}")

    if sample is None:
        sample = select_span_random(target, span_policy, force=True)
    elif sample.content != target.content:
        raise PackError("supplied FIM sample does not reconstruct the target file")

    def render_with(context: list[SourceDocument]) -> str:
        parts = [f"{_REPO}{bundle.repo_name}\n"]
        for doc in context:
            parts.append(_file_chunk(doc.path, doc.content, last=False))
        parts.append(f"{_FSEP}{target.path}\n")
        parts.append(_PRE + sample.prefix + _SUF + sample.suffix
                     + _MID + sample.middle + _END)
        return "".join(parts)

    context = list(bundle.files[:-1])
    while context and budgeter.count(render_with(context)) > budget:
        context.pop(0)
    rendered = render_with(context)
    if budgeter.count(rendered) > budget:
        raise PackError(f"FIM target {target_path!r} alone exceeds budget {budget}")
    return PackedSequence(
        repo_name=bundle.repo_name,
        included_paths=[d.path for d in context] + [target.path],
        rendered=rendered,
        approx_tokens=budgeter.count(rendered),
        fim_applied=True,
    )


def parse_packed(rendered: str) -> tuple[str, list[tuple[str, str]]]:
    """Inverse of pack_repo: recover (repo_name, [(path, content), ...]).

    Byte-exact for contents that end with a newline and for the final
    file; a non-final file without a trailing newline comes back with the
    renderer's separator "\\n" appended (the two cases are not
    distinguishable on the wire).
    """
    if not rendered.startswith(_REPO):
        raise PackError("missing repo_name sentinel")
    if not rendered.endswith(_END):
        raise PackError("missing end-of-text sentinel")
    body = rendered[len(_REPO):-len(_END)]
    nl = body.find("\n")
    if nl < 0:
        raise PackError("missing newline after repo name")
    repo_name = body[:nl]
    rest = body[nl + 1:]
    files: list[tuple[str, str]] = []
    chunks = rest.split(_FSEP)
    if chunks[0] != "":
        raise PackError("unexpected bytes before first file separator")
    for chunk in chunks[1:]:
        nl = chunk.find("\n")
        if nl < 0:
            raise PackError("missing newline after file path")
        files.append((chunk[:nl], chunk[nl + 1:]))
    return repo_name, files


def pack_repo_with_fim(bundle: RepoBundle, budget: int, budgeter: TokenBudgeter,
                       span_policy: SpanPolicy, seed: int,
                       warnings: list[dict] | None = None) -> list[PackedSequence]:
    """pack_repo, then convert each sequence's final file to a FIM target
    at the policy's rate (seeded per document). Sequences whose conversion
    would break the budget stay plain."""
    from .hashing import derive_unit

    by_path = {d.path: d for d in bundle.files}
    out: list[PackedSequence] = []
    for seq in pack_repo(bundle, budget, budgeter, warnings):
        last_path = seq.included_paths[-1]
        last_doc = by_path[last_path]
        eligible = (last_path not in seq.truncated_paths
                    and derive_unit(seed, "repo-fim", last_doc.doc_id)
                    < span_policy.fim_rate)
        if eligible:
            sub = RepoBundle(repo_name=bundle.repo_name,
                             files=[by_path[p] for p in seq.included_paths])
            try:
                seq = render_repo_fim(sub, last_path, span_policy, budgeter, budget)
            except PackError:
                pass  # keep the plain sequence
        out.append(seq)
    return out


_IMPORT_LINE = re.compile(
    r"^\s*(?:import|from|#include|require|use|using|include)\b(.*)$",
    re.MULTILINE)


def _import_targets(content: str) -> list[str]:
    return [m.group(1) for m in _IMPORT_LINE.finditer(content)]


def order_files(bundle: RepoBundle, strategy: str = "path-lex") -> RepoBundle:
    """Deterministic total ordering of the bundle's files."""
    if strategy not in ORDER_STRATEGIES:
        raise ValueError(f"unknown order strategy: {strategy!r}")
    if strategy == "path-lex":
        ordered = sorted(bundle.files, key=lambda d: d.path)
        return RepoBundle(repo_name=bundle.repo_name, files=ordered)

    # dependency-first: an edge dep -> importer for every import-like line
    # naming another file's stem; Kahn's algorithm with a lexicographic
    # min-heap gives the unique smallest topological order. Cycle remnants
    # are appended lexicographically.
    by_path = {d.path: d for d in bundle.files}
    stems: dict[str, list[str]] = {}
    for path in by_path:
        stem = re.sub(r"\.[^./]+$", "", path.rsplit("/", 1)[-1])
        stems.setdefault(stem, []).append(path)
    edges: dict[str, set[str]] = {p: set() for p in by_path}  # dep -> importers
    indegree: dict[str, int] = {p: 0 for p in by_path}
    for path, doc in by_path.items():
        for line in _import_targets(doc.content):
            mentioned = set(re.findall(r"[\w./]+", line))
            for token in mentioned:
                stem = re.sub(r"\.[^./]+$", "", token.rsplit("/", 1)[-1])
                for dep in stems.get(stem, ()):
                    if dep != path and path not in edges[dep]:
                        edges[dep].add(path)
                        indegree[path] += 1
    heap = sorted(p for p, deg in indegree.items() if deg == 0)
    heapq.heapify(heap)
    ordered_paths: list[str] = []
    while heap:
        p = heapq.heappop(heap)
        ordered_paths.append(p)
        for importer in sorted(edges[p]):
            indegree[importer] -= 1
            if indegree[importer] == 0:
                heapq.heappush(heap, importer)
    ordered_paths.extend(sorted(p for p in by_path if p not in set(ordered_paths)))
    return RepoBundle(repo_name=bundle.repo_name,
                      files=[by_path[p] for p in ordered_paths])
