"""Corpus ingestion: walk a tree, tag languages, emit a deterministic
document stream with a JSONL manifest.

Files are emitted in lexicographic path order so reruns produce
byte-identical manifests regardless of filesystem enumeration order.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator

from .hashing import stable_hex

DOMAINS = ("code", "text", "math")

DEFAULT_MAX_FILE_BYTES = 1 << 20  # oversized machine-generated files are noise

# Extension map, editable via config overlay. Shipped as a best-effort
# default covering the common languages; unknown extensions fall back to
# shebang sniffing and then "unknown".
EXTENSION_MAP: dict[str, str] = {
    ".py": "python", ".pyw": "python", ".pyi": "python",
    ".c": "c", ".h": "c",
    ".cc": "cpp", ".cpp": "cpp", ".cxx": "cpp", ".hpp": "cpp", ".hh": "cpp",
    ".cs": "csharp",
    ".java": "java",
    ".js": "javascript", ".mjs": "javascript", ".cjs": "javascript", ".jsx": "javascript",
    ".ts": "typescript", ".tsx": "typescript",
    ".go": "go",
    ".rs": "rust",
    ".rb": "ruby",
    ".php": "php",
    ".swift": "swift",
    ".kt": "kotlin", ".kts": "kotlin",
    ".scala": "scala",
    ".sh": "shell", ".bash": "shell", ".zsh": "shell",
    ".pl": "perl", ".pm": "perl",
    ".lua": "lua",
    ".r": "r", ".R": "r",
    ".jl": "julia",
    ".hs": "haskell",
    ".ml": "ocaml", ".mli": "ocaml",
    ".ex": "elixir", ".exs": "elixir",
    ".erl": "erlang",
    ".clj": "clojure", ".cljs": "clojure",
    ".dart": "dart",
    ".groovy": "groovy",
    ".m": "objective-c",
    ".f90": "fortran", ".f95": "fortran", ".f": "fortran",
    ".sql": "sql",
    ".html": "html", ".htm": "html",
    ".css": "css",
    ".xml": "xml",
    ".json": "json",
    ".yaml": "yaml", ".yml": "yaml",
    ".toml": "toml",
    ".md": "markdown", ".markdown": "markdown",
    ".rst": "restructuredtext",
    ".tex": "tex",
    ".txt": "text",
    ".vim": "vimscript",
    ".zig": "zig",
    ".nim": "nim",
    ".cr": "crystal",
    ".d": "d",
    ".pas": "pascal",
    ".vb": "visual-basic",
    ".asm": "assembly", ".s": "assembly",
    ".cmake": "cmake",
    ".mk": "makefile",
    ".dockerfile": "dockerfile",
    ".proto": "protobuf",
    ".cu": "cuda",
    ".tf": "terraform",
    ".ps1": "powershell",
    ".bat": "batch", ".cmd": "batch",
}

_SHEBANG_MAP = {
    "python": "python", "python3": "python",
    "bash": "shell", "sh": "shell", "zsh": "shell",
    "node": "javascript",
    "perl": "perl",
    "ruby": "ruby",
    "php": "php",
    "Rscript": "r",
}

_SPECIAL_NAMES = {
    "makefile": "makefile",
    "dockerfile": "dockerfile",
    "cmakelists.txt": "cmake",
}


@dataclass
class SourceDocument:
    doc_id: str
    repo: str
    path: str
    language: str
    content: str
    byte_len: int
    line_count: int
    domain: str
    quality_stage: int = 0

    @classmethod
    def build(cls, repo: str, path: str, content: str, domain: str,
              language: str | None = None) -> "SourceDocument":
        if domain not in DOMAINS:
            raise ValueError(f"unknown domain: {domain!r}")
        return cls(
            doc_id=stable_hex(repo, path, content),
            repo=repo,
            path=path,
            language=language if language is not None else detect_language(path, content),
            content=content,
            byte_len=len(content.encode("utf-8")),
            line_count=content.count("\n") + (1 if content and not content.endswith("\n") else 0),
            domain=domain,
        )

    def with_stage(self, stage: int) -> "SourceDocument":
        return replace(self, quality_stage=stage)

    def manifest_record(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "repo": self.repo,
            "path": self.path,
            "language": self.language,
            "byte_len": self.byte_len,
            "line_count": self.line_count,
            "domain": self.domain,
            "quality_stage": self.quality_stage,
        }


@dataclass
class RepoBundle:
    repo_name: str
    files: list[SourceDocument] = field(default_factory=list)

    def __post_init__(self) -> None:
        paths = [f.path for f in self.files]
        if len(set(paths)) != len(paths):
            raise ValueError(f"duplicate paths in repo {self.repo_name!r}")
        for f in self.files:
            if f.repo != self.repo_name:
                raise ValueError(f"file {f.path!r} belongs to repo {f.repo!r}, "
                                 f"not {self.repo_name!r}")


def detect_language(path: str, content: str) -> str:
    """Extension-map lookup, then shebang sniffing, else "unknown"."""
    name = os.path.basename(path)
    special = _SPECIAL_NAMES.get(name.lower())
    if special:
        return special
    ext = os.path.splitext(name)[1]
    lang = EXTENSION_MAP.get(ext) or EXTENSION_MAP.get(ext.lower())
    if lang:
        return lang
    if content.startswith("#!"):
        first = content.splitlines()[0]
        interp = first[2:].strip().split()
        if interp:
            prog = os.path.basename(interp[0])
            if prog == "env" and len(interp) > 1:
                prog = os.path.basename(interp[1])
            hit = _SHEBANG_MAP.get(prog)
            if hit:
                return hit
    return "unknown"


def _looks_binary(raw: bytes) -> bool:
    return b"\x00" in raw[:8192]


def ingest_directory(root: str | Path, domain: str,
                     repo_name: str | None = None,
                     max_file_bytes: int = DEFAULT_MAX_FILE_BYTES,
                     warnings: list[dict] | None = None,
                     ) -> Iterator[SourceDocument]:
    """Yield one SourceDocument per regular file under *root*.

    Emission order is lexicographic by relative path. Binary files and
    files over *max_file_bytes* are skipped; unreadable files are skipped
    with a warning record appended to *warnings*.
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"ingest root does not exist: {root}")
    repo = repo_name if repo_name is not None else root.name

    rel_paths = sorted(
        p.relative_to(root).as_posix()
        for p in root.rglob("*") if p.is_file()
    )
    for rel in rel_paths:
        full = root / rel
        try:
            raw = full.read_bytes()
        except OSError as exc:
            if warnings is not None:
                warnings.append({"path": rel, "warning": f"unreadable: {exc}"})
            continue
        if len(raw) > max_file_bytes:
            if warnings is not None:
                warnings.append({"path": rel, "warning": "oversize"})
            continue
        if _looks_binary(raw):
            continue
        content = raw.decode("utf-8", errors="replace")
        yield SourceDocument.build(repo=repo, path=rel, content=content, domain=domain)


def group_by_repo(docs: Iterable[SourceDocument]) -> list[RepoBundle]:
    """Group a document stream into per-repo bundles, order-preserving."""
    bundles: dict[str, list[SourceDocument]] = {}
    for doc in docs:
        bundles.setdefault(doc.repo, []).append(doc)
    return [RepoBundle(repo_name=name, files=files) for name, files in bundles.items()]
