"""End-to-end orchestration with persistent manifests and resumability.

Stage outputs are JSONL manifests under the configured output root; a
run-state file records a fingerprint of (config, input) per completed
stage so reruns skip stages whose outputs are already valid. Every output
byte is a pure function of (inputs, config, seed); worker count only
changes wall-clock time.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import decontam as decontam_mod
from . import filtering, fim, gate, manifest, mixture, needle, packing
from .config import PipelineConfig
from .hashing import stable_hex
from .ingest import RepoBundle, SourceDocument, group_by_repo, ingest_directory
from .sentinels import TokenBudgeter, find_sentinel_collisions

WORKERS_ENV = "CODEPREP_WORKERS"


class PipelineError(RuntimeError):
    def __init__(self, stage: str, message: str, last_doc_id: str | None = None):
        detail = f"stage {stage}: {message}"
        if last_doc_id:
            detail += f" (last doc_id {last_doc_id})"
        super().__init__(detail)
        self.stage = stage
        self.last_doc_id = last_doc_id


@dataclass
class RunReport:
    stages: dict[str, dict] = field(default_factory=dict)
    skipped: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({"stages": self.stages, "skipped": self.skipped},
                          indent=2, sort_keys=True)


def _doc_record(doc: SourceDocument) -> dict:
    rec = doc.manifest_record()
    rec["content"] = doc.content
    return rec


def _doc_from_record(rec: dict) -> SourceDocument:
    return SourceDocument(
        doc_id=rec["doc_id"], repo=rec["repo"], path=rec["path"],
        language=rec["language"], content=rec["content"],
        byte_len=rec["byte_len"], line_count=rec["line_count"],
        domain=rec["domain"], quality_stage=rec.get("quality_stage", 0))


class Runner:
    def __init__(self, config: PipelineConfig):
        self.config = config
        self.out = Path(config.output_root)
        self.out.mkdir(parents=True, exist_ok=True)
        self.workers = int(os.environ.get(WORKERS_ENV, config.workers) or 1)
        self.budgeter = TokenBudgeter(config.budgeter_mode)
        self.report = RunReport()
        self._state_path = self.out / "run_state.json"
        self._state: dict[str, str] = {}
        if self._state_path.exists():
            self._state = json.loads(self._state_path.read_text())

    # -- resumability ------------------------------------------------------

    def _fingerprint(self, stage: str, *inputs: Path) -> str:
        parts: list[str | bytes] = [stage, json.dumps(
            self.config.__dict__, default=lambda o: o.__dict__, sort_keys=True)]
        for p in inputs:
            parts.append(p.read_bytes() if p.exists() else b"<missing>")
        return stable_hex(*parts)

    def _done(self, stage: str, fingerprint: str, outputs: list[Path]) -> bool:
        return (self._state.get(stage) == fingerprint
                and all(p.exists() for p in outputs))

    def _mark(self, stage: str, fingerprint: str) -> None:
        self._state[stage] = fingerprint
        self._state_path.write_text(json.dumps(self._state, indent=2, sort_keys=True))

    # -- stages ------------------------------------------------------------

    def ingest(self) -> Path:
        out_path = self.out / "ingest.jsonl"
        root = Path(self.config.input_root)
        if not root.is_dir():
            raise PipelineError("ingest", f"input root missing: {root}")
        # input tree fingerprint: the sorted (path, size) listing
        listing = json.dumps(sorted(
            (p.relative_to(root).as_posix(), p.stat().st_size)
            for p in root.rglob("*") if p.is_file()))
        fp = stable_hex(self._fingerprint("ingest"), listing)
        if self._done("ingest", fp, [out_path]):
            self.report.skipped.append("ingest")
            return out_path
        warnings: list[dict] = []
        docs = list(ingest_directory(root, self.config.domain, warnings=warnings))
        manifest.write_jsonl(out_path, (_doc_record(d) for d in docs))
        manifest.write_jsonl(self.out / "ingest.warnings.jsonl", warnings)
        self.report.stages["ingest"] = {
            "docs": len(docs), "bytes": sum(d.byte_len for d in docs),
            "warnings": len(warnings)}
        self._mark("ingest", fp)
        return out_path

    def filter(self, in_path: Path) -> Path:
        out_path = self.out / "filtered.jsonl"
        fp = self._fingerprint("filter", in_path)
        if self._done("filter", fp, [out_path]):
            self.report.skipped.append("filter")
            return out_path
        docs = [_doc_from_record(r) for r in manifest.read_jsonl(in_path)]
        cascade = filtering.CascadeConfig.default(self.config.cascade_stages)
        drop_log: list[dict] = []
        stage_report: dict[int, filtering.StageStats] = {}
        kept = list(filtering.run_cascade(docs, cascade, drop_log, stage_report))
        manifest.write_jsonl(out_path, (_doc_record(d) for d in kept))
        manifest.write_jsonl(self.out / "filter.drops.jsonl", drop_log)
        (self.out / "filter.stages.json").write_text(json.dumps(
            {str(i): s.__dict__ for i, s in sorted(stage_report.items())},
            indent=2, sort_keys=True))
        self.report.stages["filter"] = {"docs_in": len(docs), "docs_out": len(kept),
                                        "dropped": len(drop_log)}
        self._mark("filter", fp)
        return out_path

    def decontam(self, in_path: Path) -> Path:
        out_path = self.out / "clean.jsonl"
        sources = [Path(s) for s in self.config.decontam_sources]
        fp = self._fingerprint("decontam", in_path, *sources)
        if self._done("decontam", fp, [out_path]):
            self.report.skipped.append("decontam")
            return out_path
        test_docs: list[tuple[str, str]] = []
        for src in sources:
            name = src.stem
            if src.suffix == ".jsonl":
                for rec in manifest.read_jsonl(src):
                    test_docs.append((name, rec["text"]))
            else:
                test_docs.append((name, src.read_text(encoding="utf-8")))
        index = decontam_mod.build_index(test_docs, n=self.config.decontam_n)
        docs = [_doc_from_record(r) for r in manifest.read_jsonl(in_path)]
        removal_log: list[dict] = []
        kept = list(decontam_mod.filter_corpus(docs, index, removal_log))
        manifest.write_jsonl(out_path, (_doc_record(d) for d in kept))
        manifest.write_jsonl(self.out / "decontam.removals.jsonl", removal_log)
        self.report.stages["decontam"] = {
            "docs_in": len(docs), "docs_out": len(kept),
            "removed": len(docs) - len(kept), "index_ngrams": len(index)}
        self._mark("decontam", fp)
        return out_path

    def _map(self, fn, items):
        if self.workers > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                return list(pool.map(fn, items))
        return [fn(x) for x in items]

    def fim_stage(self, in_path: Path) -> Path:
        out_path = self.out / "fim.jsonl"
        fp = self._fingerprint("fim", in_path)
        if self._done("fim", fp, [out_path]):
            self.report.skipped.append("fim")
            return out_path
        policy = fim.SpanPolicy(
            fim_rate=self.config.fim_rate,
            min_middle_chars=self.config.fim_min_middle_chars,
            max_middle_fraction=self.config.fim_max_middle_fraction,
            seed=self.config.seed)
        docs = [_doc_from_record(r) for r in manifest.read_jsonl(in_path)]
        dropped: list[dict] = []
        safe: list[SourceDocument] = []
        for doc in docs:
            if find_sentinel_collisions(doc.content):
                dropped.append({"doc_id": doc.doc_id, "reason": "sentinel-collision"})
            else:
                safe.append(doc)

        def build(doc: SourceDocument) -> dict:
            sample = fim.build_sample(doc, policy, ast_mode=self.config.fim_ast_mode)
            return {"doc_id": doc.doc_id, "origin": sample.origin,
                    "rendered": fim.render_file_fim(sample)}

        records = self._map(build, safe)
        records.sort(key=lambda r: r["doc_id"])
        manifest.write_jsonl(out_path, records)
        manifest.write_jsonl(self.out / "fim.drops.jsonl", dropped)
        n_fim = sum(1 for r in records if r["origin"] != fim.ORIGIN_PLAIN)
        self.report.stages["fim"] = {"docs": len(records), "fim_samples": n_fim,
                                     "plain_samples": len(records) - n_fim,
                                     "dropped": len(dropped)}
        self._mark("fim", fp)
        return out_path

    def pack_stage(self, in_path: Path) -> Path:
        out_path = self.out / "packed.index.jsonl"
        shard_path = self.out / "packed.shard.txt"
        fp = self._fingerprint("pack", in_path)
        if self._done("pack", fp, [out_path, shard_path]):
            self.report.skipped.append("pack")
            return out_path
        docs = [_doc_from_record(r) for r in manifest.read_jsonl(in_path)]
        dropped: list[dict] = []
        safe = []
        for doc in docs:
            if find_sentinel_collisions(doc.content):
                dropped.append({"doc_id": doc.doc_id, "reason": "sentinel-collision"})
            else:
                safe.append(doc)
        bundles = group_by_repo(safe)
        bundles = [packing.order_files(b, self.config.pack_order) for b in bundles]
        bundles.sort(key=lambda b: b.repo_name)
        warnings: list[dict] = []
        index_records: list[dict] = []
        with open(shard_path, "w", encoding="utf-8") as shard:
            for bundle in bundles:
                sequences = self._pack_bundle(bundle, warnings)
                for i, seq in enumerate(sequences):
                    shard.write(seq.rendered)
                    shard.write("\n")
                    index_records.append({
                        "repo": seq.repo_name, "sequence_idx": i,
                        "paths": seq.included_paths,
                        "approx_tokens": seq.approx_tokens,
                        "fim_applied": seq.fim_applied})
        manifest.write_jsonl(out_path, index_records)
        manifest.write_jsonl(self.out / "pack.warnings.jsonl", warnings + dropped)
        self.report.stages["pack"] = {"repos": len(bundles),
                                      "sequences": len(index_records),
                                      "dropped_docs": len(dropped)}
        self._mark("pack", fp)
        return out_path

    def _pack_bundle(self, bundle: RepoBundle,
                     warnings: list[dict]) -> list[packing.PackedSequence]:
        if not self.config.pack_fim_last:
            return packing.pack_repo(bundle, self.config.pack_budget,
                                     self.budgeter, warnings)
        policy = fim.SpanPolicy(
            fim_rate=self.config.fim_rate,
            min_middle_chars=self.config.fim_min_middle_chars,
            max_middle_fraction=self.config.fim_max_middle_fraction,
            seed=self.config.seed)
        return packing.pack_repo_with_fim(
            bundle, self.config.pack_budget, self.budgeter, policy,
            self.config.seed, warnings)

    def mix_stage(self, in_paths: dict[str, Path]) -> Path:
        out_path = self.out / "mixed.jsonl"
        fp = self._fingerprint("mix", *in_paths.values())
        if self._done("mix", fp, [out_path]):
            self.report.skipped.append("mix")
            return out_path
        streams: dict[str, list[SourceDocument]] = {}
        available: dict[str, int] = {}
        for domain, path in in_paths.items():
            docs = [_doc_from_record(r) for r in manifest.read_jsonl(path)]
            if not docs:
                continue
            streams[domain] = docs
            available[domain] = sum(self.budgeter.count(d.content) for d in docs)
        targets = {d: t for d, t in self.config.mixture_targets.items() if d in streams}
        if not targets:
            raise PipelineError("mix", "no domain streams available")
        plan = mixture.plan_mixture(available, targets,
                                    max_epochs=self.config.mixture_max_epochs)
        achieved: dict[str, int] = {}
        emitted = list(mixture.sample_interleaved(streams, plan, self.budgeter,
                                                  achieved))
        manifest.write_jsonl(out_path, (
            {"doc_id": d.doc_id, "domain": d.domain} for d in emitted))
        (self.out / "mix.report.json").write_text(
            json.dumps(plan.report(achieved), indent=2, sort_keys=True))
        self.report.stages["mix"] = {"docs": len(emitted),
                                     "tokens": sum(achieved.values())}
        self._mark("mix", fp)
        return out_path

    def gate_stage(self, samples_path: Path) -> Path:
        out_path = self.out / "gated.jsonl"
        fp = self._fingerprint("gate", samples_path)
        if self._done("gate", fp, [out_path]):
            self.report.skipped.append("gate")
            return out_path
        samples = [gate.build_sample(r["sample_id"], r["question"], r["answer"])
                   for r in manifest.read_jsonl(samples_path)]
        external: dict[str, dict[str, float]] = {}
        if self.config.gate_scores_path:
            for rec in manifest.read_jsonl(self.config.gate_scores_path):
                external.setdefault(rec["sample_id"], {})[rec["criterion"]] = rec["score"]
        threshold = (self.config.gate_min_checklist_total
                     if self.config.gate_min_checklist_total >= 0 else None)
        policy = gate.GatePolicy(
            no_code_keep_prob=self.config.gate_no_code_keep_prob,
            long_tail_keep_prob=self.config.gate_long_tail_keep_prob,
            min_checklist_total=threshold,
            require_static_check=self.config.gate_require_static_check,
            seed=self.config.seed)
        drop_log: list[dict] = []
        kept = list(gate.gate_instruction_corpus(samples, policy, external, drop_log))
        manifest.write_jsonl(out_path, (
            {"sample_id": s.sample_id, "question": s.question, "answer": s.answer,
             "language_label": s.language_label} for s in kept))
        manifest.write_jsonl(self.out / "gate.drops.jsonl", drop_log)
        self.report.stages["gate"] = {"samples_in": len(samples),
                                      "samples_out": len(kept)}
        self._mark("gate", fp)
        return out_path

    def needle_stage(self, in_path: Path) -> Path:
        out_path = self.out / "needle.instances.jsonl"
        fp = self._fingerprint("needle", in_path)
        if self._done("needle", fp, [out_path]):
            self.report.skipped.append("needle")
            return out_path
        corpus = [(r["path"], r["content"]) for r in manifest.read_jsonl(in_path)]
        grid = needle.generate_grid(
            corpus, depths=self.config.needle_depths,
            lengths=self.config.needle_lengths,
            needle=self.config.needle_source, seed=self.config.seed,
            budgeter=self.budgeter)
        context_dir = self.out / "needle_contexts"
        context_dir.mkdir(exist_ok=True)
        records = []
        for inst in grid.instances:
            ctx_path = context_dir / f"{inst.instance_id}.txt"
            ctx_path.write_text(inst.prompt, encoding="utf-8")
            records.append({"instance_id": inst.instance_id,
                            "depth": inst.depth_fraction,
                            "length": inst.target_length,
                            "context_path": str(ctx_path),
                            "expected": inst.expected})
        manifest.write_jsonl(out_path, records)
        self.report.stages["needle"] = {"instances": len(records)}
        self._mark("needle", fp)
        return out_path

    # -- composition -------------------------------------------------------

    def run(self) -> RunReport:
        cfg = self.config
        current: Path | None = None
        if cfg.stages.ingest:
            current = self.ingest()
        if cfg.stages.filter and current is not None:
            current = self.filter(current)
        if cfg.stages.decontam and current is not None:
            current = self.decontam(current)
        if cfg.stages.fim and current is not None:
            self.fim_stage(current)
        if cfg.stages.pack and current is not None:
            self.pack_stage(current)
        if cfg.stages.mix and current is not None:
            self.mix_stage({cfg.domain: current})
        if cfg.stages.needle and current is not None:
            self.needle_stage(current)
        return self.report


def run(config: PipelineConfig) -> RunReport:
    return Runner(config).run()
