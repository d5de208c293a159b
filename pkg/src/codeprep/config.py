"""Pipeline configuration: one TOML document drives every stage.

load(save(c)) == c holds for any config built from plain values; all
fields have schema-documented defaults so a minimal config is valid.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path

import toml

from .mixture import DEFAULT_MAX_EPOCHS, DEFAULT_TARGETS
from .needle import DEFAULT_DEPTHS, DEFAULT_LENGTHS, DEFAULT_NEEDLE
from .sentinels import REPO_STAGE_BUDGET


@dataclass
class StageToggles:
    ingest: bool = True
    filter: bool = True
    decontam: bool = True
    fim: bool = True
    pack: bool = False
    mix: bool = True
    gate: bool = False
    needle: bool = False


@dataclass
class PipelineConfig:
    seed: int = 0
    workers: int = 1
    input_root: str = ""
    output_root: str = "out"
    domain: str = "code"
    stages: StageToggles = field(default_factory=StageToggles)

    # quality filter
    cascade_stages: int = 1

    # decontamination
    decontam_sources: list[str] = field(default_factory=list)
    decontam_n: int = 10

    # FIM policy
    fim_rate: float = 0.5
    fim_min_middle_chars: int = 1
    fim_max_middle_fraction: float = 0.5
    fim_ast_mode: bool = False

    # repo packing
    pack_budget: int = REPO_STAGE_BUDGET
    pack_order: str = "path-lex"
    pack_fim_last: bool = False
    budgeter_mode: str = "whitespace-word"

    # mixture
    mixture_targets: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_TARGETS))
    mixture_max_epochs: float = DEFAULT_MAX_EPOCHS

    # instruction gate
    gate_no_code_keep_prob: float = 0.1
    gate_long_tail_keep_prob: float = 1.0
    gate_min_checklist_total: float = -1.0  # negative disables the threshold
    gate_require_static_check: bool = False
    gate_scores_path: str = ""

    # needle grid
    needle_source: str = DEFAULT_NEEDLE
    needle_depths: list[float] = field(default_factory=lambda: list(DEFAULT_DEPTHS))
    needle_lengths: list[int] = field(default_factory=lambda: list(DEFAULT_LENGTHS))

    def save(self, path: str | Path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            toml.dump(asdict(self), fh)

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        with open(path, encoding="utf-8") as fh:
            data = toml.load(fh)
        stages = StageToggles(**data.pop("stages", {}))
        return cls(stages=stages, **data)
