"""Command-line interface: one subcommand per pipeline stage plus a
composed `run` and a `report` pretty-printer.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import decontam as decontam_mod
from . import filtering, fim, gate, manifest, mixture, needle, packing
from .config import PipelineConfig
from .ingest import SourceDocument, group_by_repo, ingest_directory
from .pipeline import Runner, _doc_from_record, _doc_record
from .sentinels import REGISTRY, TokenBudgeter


@click.group()
def main() -> None:
    """Deterministic pretraining-data pipeline for code LLMs."""


@main.command()
@click.option("--root", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--domain", default="code", type=click.Choice(["code", "text", "math"]))
@click.option("--out", "out_path", required=True, type=click.Path())
def ingest(root: str, domain: str, out_path: str) -> None:
    """Walk a tree and emit a document manifest."""
    warnings: list[dict] = []
    docs = list(ingest_directory(root, domain, warnings=warnings))
    n = manifest.write_jsonl(out_path, (_doc_record(d) for d in docs))
    for w in warnings:
        click.echo(f"warning: {w}", err=True)
    click.echo(f"ingested {n} documents -> {out_path}")


@main.command("filter")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--stages", default=1, type=int)
@click.option("--drop-log", default=None, type=click.Path())
def filter_cmd(in_path: str, out_path: str, stages: int, drop_log: str | None) -> None:
    """Run the quality cascade over a manifest."""
    docs = [_doc_from_record(r) for r in manifest.read_jsonl(in_path)]
    cascade = filtering.CascadeConfig.default(stages)
    drops: list[dict] = []
    kept = list(filtering.run_cascade(docs, cascade, drops))
    manifest.write_jsonl(out_path, (_doc_record(d) for d in kept))
    if drop_log:
        manifest.write_jsonl(drop_log, drops)
    click.echo(f"kept {len(kept)}/{len(docs)} documents -> {out_path}")


@main.command()
@click.option("--tests", "tests_dir", required=True, type=click.Path(exists=True))
@click.option("--n", default=10, type=int)
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--removal-log", default=None, type=click.Path())
def decontam(tests_dir: str, n: int, in_path: str, out_path: str,
             removal_log: str | None) -> None:
    """Remove documents overlapping benchmark test data."""
    test_docs: list[tuple[str, str]] = []
    tests = Path(tests_dir)
    sources = sorted(tests.iterdir()) if tests.is_dir() else [tests]
    for src in sources:
        if not src.is_file():
            continue
        if src.suffix == ".jsonl":
            for rec in manifest.read_jsonl(src):
                test_docs.append((src.stem, rec["text"]))
        else:
            test_docs.append((src.stem, src.read_text(encoding="utf-8")))
    index = decontam_mod.build_index(test_docs, n=n)
    docs = [_doc_from_record(r) for r in manifest.read_jsonl(in_path)]
    removals: list[dict] = []
    kept = list(decontam_mod.filter_corpus(docs, index, removals))
    manifest.write_jsonl(out_path, (_doc_record(d) for d in kept))
    if removal_log:
        manifest.write_jsonl(removal_log, removals)
    click.echo(f"kept {len(kept)}/{len(docs)} documents "
               f"({len(index)} indexed {n}-grams) -> {out_path}")


@main.command("fim")
@click.option("--mode", default="file", type=click.Choice(["file"]))
@click.option("--rate", default=0.5, type=float)
@click.option("--seed", default=0, type=int)
@click.option("--ast-langs", default="", help="comma-separated languages to try AST spans for")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def fim_cmd(mode: str, rate: float, seed: int, ast_langs: str,
            in_path: str, out_path: str) -> None:
    """Build file-level FIM samples from a manifest."""
    ast_set = {x.strip() for x in ast_langs.split(",") if x.strip()}
    policy = fim.SpanPolicy(fim_rate=rate, seed=seed)
    records = []
    for rec in manifest.read_jsonl(in_path):
        doc = _doc_from_record(rec)
        sample = fim.build_sample(doc, policy, ast_mode=doc.language in ast_set)
        records.append({"doc_id": doc.doc_id, "origin": sample.origin,
                        "rendered": fim.render_file_fim(sample)})
    records.sort(key=lambda r: r["doc_id"])
    manifest.write_jsonl(out_path, records)
    click.echo(f"wrote {len(records)} samples -> {out_path}")


@main.command()
@click.option("--budget", default=32768, type=int)
@click.option("--order", default="path-lex", type=click.Choice(packing.ORDER_STRATEGIES))
@click.option("--fim-last", is_flag=True, default=False)
@click.option("--seed", default=0, type=int)
@click.option("--budgeter", "budgeter_mode", default="whitespace-word",
              type=click.Choice(["whitespace-word", "byte-quarter"]))
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--shard", "shard_path", required=True, type=click.Path())
@click.option("--index", "index_path", required=True, type=click.Path())
def pack(budget: int, order: str, fim_last: bool, seed: int, budgeter_mode: str,
         in_path: str, shard_path: str, index_path: str) -> None:
    """Pack repositories into budget-bounded sequences."""
    docs = [_doc_from_record(r) for r in manifest.read_jsonl(in_path)]
    budgeter = TokenBudgeter(budgeter_mode)
    bundles = sorted(group_by_repo(docs), key=lambda b: b.repo_name)
    policy = fim.SpanPolicy(seed=seed)
    warnings: list[dict] = []
    index_records = []
    with open(shard_path, "w", encoding="utf-8") as shard:
        for bundle in bundles:
            bundle = packing.order_files(bundle, order)
            if fim_last:
                sequences = packing.pack_repo_with_fim(
                    bundle, budget, budgeter, policy, seed, warnings)
            else:
                sequences = packing.pack_repo(bundle, budget, budgeter, warnings)
            for i, seq in enumerate(sequences):
                shard.write(seq.rendered)
                shard.write("\n")
                index_records.append({"repo": seq.repo_name, "sequence_idx": i,
                                      "paths": seq.included_paths,
                                      "approx_tokens": seq.approx_tokens,
                                      "fim_applied": seq.fim_applied})
    manifest.write_jsonl(index_path, index_records)
    click.echo(f"wrote {len(index_records)} sequences -> {shard_path}")


@main.command()
@click.option("--targets", default="code=0.7,text=0.2,math=0.1")
@click.option("--seed", default=0, type=int)
@click.option("--inputs", required=True,
              help="comma-separated domain=manifest.jsonl pairs")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--report", "report_path", default=None, type=click.Path())
def mix(targets: str, seed: int, inputs: str, out_path: str,
        report_path: str | None) -> None:
    """Interleave domain streams to target token ratios."""
    target_map = {}
    for part in targets.split(","):
        d, v = part.split("=")
        target_map[d.strip()] = float(v)
    budgeter = TokenBudgeter()
    streams: dict[str, list[SourceDocument]] = {}
    available: dict[str, int] = {}
    for part in inputs.split(","):
        d, path = part.split("=")
        docs = [_doc_from_record(r) for r in manifest.read_jsonl(path.strip())]
        streams[d.strip()] = docs
        available[d.strip()] = sum(budgeter.count(x.content) for x in docs)
    plan = mixture.plan_mixture(available, target_map)
    achieved: dict[str, int] = {}
    emitted = list(mixture.sample_interleaved(streams, plan, budgeter, achieved))
    manifest.write_jsonl(out_path, (
        {"doc_id": d.doc_id, "domain": d.domain} for d in emitted))
    if report_path:
        Path(report_path).write_text(json.dumps(plan.report(achieved),
                                                indent=2, sort_keys=True))
    click.echo(f"emitted {len(emitted)} documents, "
               f"{sum(achieved.values())} tokens -> {out_path}")


@main.command("gate")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--scores", "scores_path", default=None, type=click.Path(exists=True))
@click.option("--no-code-keep-prob", default=0.1, type=float)
@click.option("--long-tail-keep-prob", default=1.0, type=float)
@click.option("--min-total", default=None, type=float)
@click.option("--require-static-check", is_flag=True, default=False)
@click.option("--seed", default=0, type=int)
def gate_cmd(in_path: str, out_path: str, scores_path: str | None,
             no_code_keep_prob: float, long_tail_keep_prob: float,
             min_total: float | None, require_static_check: bool, seed: int) -> None:
    """Gate an instruction corpus."""
    samples = [gate.build_sample(r["sample_id"], r["question"], r["answer"])
               for r in manifest.read_jsonl(in_path)]
    external: dict[str, dict[str, float]] = {}
    if scores_path:
        for rec in manifest.read_jsonl(scores_path):
            external.setdefault(rec["sample_id"], {})[rec["criterion"]] = rec["score"]
    policy = gate.GatePolicy(no_code_keep_prob=no_code_keep_prob,
                             long_tail_keep_prob=long_tail_keep_prob,
                             min_checklist_total=min_total,
                             require_static_check=require_static_check,
                             seed=seed)
    drops: list[dict] = []
    kept = list(gate.gate_instruction_corpus(samples, policy, external, drops))
    manifest.write_jsonl(out_path, (
        {"sample_id": s.sample_id, "question": s.question, "answer": s.answer,
         "language_label": s.language_label} for s in kept))
    click.echo(f"kept {len(kept)}/{len(samples)} samples -> {out_path}")


@main.group("needle")
def needle_group() -> None:
    """Long-context needle probes."""


@needle_group.command("gen")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True),
              help="manifest or directory of haystack files")
@click.option("--depths", default=",".join(str(d) for d in needle.DEFAULT_DEPTHS))
@click.option("--lengths", default=",".join(str(x) for x in needle.DEFAULT_LENGTHS))
@click.option("--needle", "needle_path", default=None, type=click.Path(exists=True))
@click.option("--seed", default=0, type=int)
@click.option("--out", "out_dir", required=True, type=click.Path())
def needle_gen(corpus_path: str, depths: str, lengths: str,
               needle_path: str | None, seed: int, out_dir: str) -> None:
    """Generate a depth x length probe grid."""
    src = Path(corpus_path)
    if src.is_dir():
        corpus = [(d.path, d.content) for d in ingest_directory(src, "code")]
    else:
        corpus = [(r["path"], r["content"]) for r in manifest.read_jsonl(src)]
    needle_src = (Path(needle_path).read_text(encoding="utf-8")
                  if needle_path else needle.DEFAULT_NEEDLE)
    grid = needle.generate_grid(
        corpus,
        depths=[float(x) for x in depths.split(",")],
        lengths=[int(x) for x in lengths.split(",")],
        needle=needle_src, seed=seed)
    out = Path(out_dir)
    ctx_dir = out / "contexts"
    ctx_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for inst in grid.instances:
        ctx = ctx_dir / f"{inst.instance_id}.txt"
        ctx.write_text(inst.prompt, encoding="utf-8")
        records.append({"instance_id": inst.instance_id, "depth": inst.depth_fraction,
                        "length": inst.target_length, "context_path": str(ctx),
                        "expected": inst.expected})
    manifest.write_jsonl(out / "instances.jsonl", records)
    click.echo(f"generated {len(records)} instances -> {out}")


@needle_group.command("score")
@click.option("--instances", "instances_path", required=True, type=click.Path(exists=True))
@click.option("--responses", "responses_path", required=True, type=click.Path(exists=True),
              help="JSONL of {instance_id, response}")
@click.option("--out", "out_path", required=True, type=click.Path())
def needle_score(instances_path: str, responses_path: str, out_path: str) -> None:
    """Score externally produced responses into a results CSV."""
    responses = {r["instance_id"]: r["response"]
                 for r in manifest.read_jsonl(responses_path)}
    rows = ["depth,length,score"]
    for rec in manifest.read_jsonl(instances_path):
        expected = needle._normalize_ws(rec["expected"])
        got = needle._normalize_ws(responses.get(rec["instance_id"], ""))
        rows.append(f"{rec['depth']},{rec['length']},{1 if expected in got else 0}")
    Path(out_path).write_text("\n".join(rows) + "\n")
    click.echo(f"scored {len(rows) - 1} instances -> {out_path}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def run(config_path: str) -> None:
    """Run the composed pipeline from a TOML config."""
    config = PipelineConfig.load(config_path)
    report = Runner(config).run()
    click.echo(report.to_json())


@main.command()
@click.option("--out-root", required=True, type=click.Path(exists=True))
@click.option("--as-json", is_flag=True, default=False)
def report(out_root: str, as_json: bool) -> None:
    """Summarize per-stage counts from a previous run's manifests."""
    root = Path(out_root)
    summary: dict[str, dict] = {}
    for name in ("ingest", "filtered", "clean", "fim", "mixed", "gated"):
        path = root / f"{name}.jsonl"
        if not path.exists():
            continue
        docs = 0
        tokens = 0
        for rec in manifest.read_jsonl(path):
            docs += 1
            tokens += len(rec.get("content", rec.get("rendered", "")).split())
        summary[name] = {"docs": docs, "approx_tokens": tokens}
    if as_json:
        click.echo(json.dumps(summary, indent=2, sort_keys=True))
    else:
        for name, stats in summary.items():
            click.echo(f"{name:>10}: {stats['docs']:>8} docs  "
                       f"{stats['approx_tokens']:>12} approx tokens")


@main.command()
def sentinels() -> None:
    """Print the special-token registry as JSON."""
    click.echo(REGISTRY.to_json())


if __name__ == "__main__":
    sys.exit(main())
