import random

from codeprep.filtering import (
    CascadeConfig,
    CascadeStage,
    FilterRule,
    StageStats,
    apply_rules,
    default_rules,
    run_cascade,
)
from codeprep.ingest import SourceDocument


def make_doc(content, path="a.py"):
    return SourceDocument.build(repo="r", path=path, content=content, domain="code")


def test_empty_document_drops_min_content():
    keep, reason = apply_rules(make_doc(""), default_rules())
    assert not keep
    assert reason == "min-content"


def test_max_line_length_threshold():
    doc = make_doc("ab\n" + "x" * 100_001 + "\n")
    keep, reason = apply_rules(doc, [r for r in default_rules()
                                     if r.name == "max-line-length"])
    assert (keep, reason) == (False, "max-line-length")


def test_autogenerated_marker_drops():
    doc = make_doc("# DO NOT EDIT\nx = 1\n" + "y = 2\n" * 20)
    keep, reason = apply_rules(doc, default_rules())
    assert (keep, reason) == (False, "autogenerated")


def test_clean_doc_keeps():
    keep, reason = apply_rules(make_doc("def f():\n    return 1\n"), default_rules())
    assert (keep, reason) == (True, None)


def _planted_corpus(rng, n=1000):
    """Synthetic docs, some with planted violations, plus the oracle set."""
    docs, violators = [], set()
    for i in range(n):
        kind = rng.randrange(4)
        if kind == 0:
            content = "def f():\n    return 42\n"  # clean
        elif kind == 1:
            content = ""  # min-content violation
        elif kind == 2:
            content = "x" * 10_500 + "\n"  # max-line-length (and mean) violation
        else:
            content = "#!*@&\n%^&$\n~~~!!\n"  # alnum-fraction violation
        doc = make_doc(content, path=f"f{i:04d}.py")
        docs.append(doc)
        if kind != 0:
            violators.add(doc.doc_id)
    return docs, violators


def test_drop_set_matches_oracle():
    rng = random.Random(9)
    docs, violators = _planted_corpus(rng)
    rules = default_rules()
    dropped = {d.doc_id for d in docs if not apply_rules(d, rules)[0]}
    # oracle: re-evaluate each rule independently
    oracle = set()
    for d in docs:
        if any(not r.check(d) for r in rules):
            oracle.add(d.doc_id)
    assert dropped == oracle == violators


def test_verdict_order_insensitive():
    rng = random.Random(10)
    docs, _ = _planted_corpus(rng, n=200)
    rules = default_rules()
    for d in docs:
        base = apply_rules(d, rules)[0]
        shuffled = rules[:]
        rng.shuffle(shuffled)
        assert apply_rules(d, shuffled)[0] == base


def test_identity_cascade_sets_stage():
    docs = [make_doc("x = 1\n", f"f{i}.py") for i in range(5)]
    cascade = CascadeConfig(stages=[CascadeStage(index=1)])
    out = list(run_cascade(docs, cascade))
    assert len(out) == 5
    assert all(d.quality_stage == 1 for d in out)


def test_monotone_survivor_counts():
    rng = random.Random(11)
    docs = [make_doc("word " * rng.randint(1, 60), f"f{i}.py") for i in range(300)]

    def max_words(limit):
        return FilterRule(f"max-words-{limit}",
                          lambda d, lim=limit: len(d.content.split()) <= lim)

    stages = [CascadeStage(index=k, rules=[max_words(60 - 12 * (k - 1))])
              for k in range(1, 5)]
    report: dict[int, StageStats] = {}
    list(run_cascade(docs, CascadeConfig(stages=stages), stage_report=report))
    counts = [report[k].docs for k in sorted(report)]
    assert counts == sorted(counts, reverse=True)


def test_known_survivor_sets_match_sequential_oracle():
    rng = random.Random(12)
    docs = [make_doc("tok " * rng.randint(1, 40), f"f{i}.py") for i in range(500)]
    limits = [35, 25, 15]
    stages = [CascadeStage(index=k + 1, rules=[
        FilterRule(f"lim{k}", lambda d, lim=limits[k]: len(d.content.split()) <= lim)])
        for k in range(3)]
    out = {d.doc_id for d in run_cascade(docs, CascadeConfig(stages=stages))}
    # oracle: sequential filtering script
    survivors = docs
    for lim in limits:
        survivors = [d for d in survivors if len(d.content.split()) <= lim]
    assert out == {d.doc_id for d in survivors}


def test_cascade_idempotent():
    rng = random.Random(13)
    docs, _ = _planted_corpus(rng, n=300)
    cascade = CascadeConfig(stages=[CascadeStage(index=1, rules=default_rules())])
    once = list(run_cascade(docs, cascade))
    twice = list(run_cascade(once, cascade))
    assert [d.doc_id for d in once] == [d.doc_id for d in twice]
    assert [d.quality_stage for d in once] == [d.quality_stage for d in twice]


def test_scorer_hook_threshold():
    docs = [make_doc("short\n", "a.py"), make_doc("much longer content here\n", "b.py")]
    stage = CascadeStage(index=1, scorer=lambda d: float(len(d.content)),
                         min_score=10.0)
    drops = []
    out = list(run_cascade(docs, CascadeConfig(stages=[stage]), drop_log=drops))
    assert [d.path for d in out] == ["b.py"]
    assert drops[0]["reason"] == "score-below-threshold"
