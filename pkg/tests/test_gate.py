import random

import pytest

from codeprep.gate import (
    CRITERIA,
    NO_LANGUAGE,
    GatePolicy,
    build_sample,
    checklist_score,
    classify_language,
    extract_code_blocks,
    gate_instruction_corpus,
    score_sample,
    static_check,
)


def test_extract_single_python_fence():
    text = "Look:\n```python\nx=1\n```\ndone"
    assert extract_code_blocks(text) == [("python", "x=1")]


def test_extract_no_fences():
    assert extract_code_blocks("just prose, no code at all") == []


def test_extract_unlabeled_fence():
    assert extract_code_blocks("```\nfoo\n```") == [("unknown", "foo")]


def test_extract_unclosed_fence_warns():
    warnings = []
    blocks = extract_code_blocks("intro\n```python\nx=1\n", warnings)
    assert blocks == []
    assert warnings == ["unclosed-fence"]


def test_extract_planted_fences_match_generator():
    rng = random.Random(61)
    langs = ["python", "javascript", "go", "rust"]
    for _ in range(200):
        planted = []
        parts = ["intro text here"]
        for _ in range(rng.randint(0, 4)):
            lang = rng.choice(langs)
            body = "\n".join("line%d = %d" % (j, j) for j in range(rng.randint(1, 4)))
            planted.append((lang, body))
            parts.append(f"```{lang}\n{body}\n```")
            parts.append("some prose between")
        text = "\n".join(parts)
        assert extract_code_blocks(text) == planted


def test_static_check_valid_and_invalid():
    assert static_check("x = 1\n", "python").status == "ok"
    result = static_check("def f(:", "python")
    assert result.status == "reject"
    assert result.error_node_count >= 1
    assert static_check('{"a": 1}', "json").status == "ok"
    assert static_check('{"a": ', "json").status == "reject"
    assert static_check("anything", "cobol").status == "unsupported"


def test_static_check_stable_under_trailing_newline():
    snippets = ["x = 1", "def f():\n    return 2", "import os"]
    for s in snippets:
        assert static_check(s, "python").status == "ok"
        assert static_check(s + "\n", "python").status == "ok"


def test_classify_majority():
    s = build_sample("s1", "q", "```python\na=1\n```\n```python\nb=2\n```")
    assert s.language_label == "python"


def test_classify_pure_prose():
    s = build_sample("s2", "What is the capital of France?", "Paris.")
    assert s.language_label == NO_LANGUAGE


def test_classify_mixed_tags_matches_hand_count():
    rng = random.Random(62)
    langs = ["python", "go", "rust"]
    for _ in range(100):
        tags = [rng.choice(langs) for _ in range(rng.randint(1, 6))]
        text = "".join(f"```{t}\ncode\n```\n" for t in tags)
        s = build_sample("sid", "q", text)
        counts = {t: tags.count(t) for t in set(tags)}
        best = max(sorted(counts), key=lambda t: counts[t])
        assert s.language_label == best


def test_checklist_hand_arithmetic():
    assert checklist_score([3, 5], [1, 1]) == 8
    assert checklist_score([4, 4, 4], [0, 0, 0]) == 0


def test_checklist_mismatch_errors():
    with pytest.raises(ValueError):
        checklist_score([1, 2], [1])
    with pytest.raises(ValueError):
        checklist_score([1], [-1])


def test_checklist_matches_naive_fold():
    rng = random.Random(63)
    for _ in range(500):
        n = rng.randint(0, 12)
        scores = [rng.uniform(0, 5) for _ in range(n)]
        weights = [rng.uniform(0, 2) for _ in range(n)]
        naive = 0.0
        for s, w in zip(scores, weights):
            naive += w * s
        assert checklist_score(scores, weights) == pytest.approx(naive, abs=1e-12)


def test_checklist_linearity_in_weights():
    rng = random.Random(64)
    for _ in range(200):
        n = rng.randint(1, 9)
        scores = [rng.uniform(0, 5) for _ in range(n)]
        w1 = [rng.uniform(0, 2) for _ in range(n)]
        w2 = [rng.uniform(0, 2) for _ in range(n)]
        c = rng.uniform(0, 3)
        lhs = checklist_score(scores, [a + b for a, b in zip(w1, w2)])
        rhs = checklist_score(scores, w1) + checklist_score(scores, w2)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)
        assert checklist_score(scores, [c * a for a in w1]) == \
            pytest.approx(c * checklist_score(scores, w1), rel=1e-12, abs=1e-12)


def test_criteria_canonical_names():
    assert CRITERIA == ("consistency", "relevance", "difficulty", "code-exist",
                        "code-correctness", "best-practices", "clarity",
                        "comments", "educational-value")


def test_score_sample_native_criteria():
    s = build_sample("s1", "q", "```python\nx = 1\n```")
    total, per = score_sample(s, GatePolicy())
    assert per["code-exist"] == 1.0
    assert per["code-correctness"] == 1.0
    bad = build_sample("s2", "q", "```python\ndef f(:\n```")
    _, per_bad = score_sample(bad, GatePolicy())
    assert per_bad["code-correctness"] == 0.0


def test_score_sample_external_scores():
    s = build_sample("s1", "q", "```python\nx = 1\n```")
    ext = {"s1": {"consistency": 4.0, "clarity": 3.0}}
    total, per = score_sample(s, GatePolicy(), ext)
    assert per["consistency"] == 4.0
    assert total == pytest.approx(4.0 + 3.0 + 1.0 + 1.0)


def _no_code_samples(n):
    return [build_sample(f"s{i}", f"prose question {i}", f"prose answer {i}")
            for i in range(n)]


def test_gate_p_zero_drops_all_no_code():
    policy = GatePolicy(no_code_keep_prob=0.0, seed=1)
    drops = []
    out = list(gate_instruction_corpus(_no_code_samples(50), policy, drop_log=drops))
    assert out == []
    assert all(d["reason"] == "no-code" for d in drops)


def test_gate_identity_policy():
    samples = _no_code_samples(20) + [
        build_sample("c1", "q", "```ocaml\nlet x = 1\n```"),
        build_sample("c2", "q", "```python\nx = 1\n```")]
    policy = GatePolicy(no_code_keep_prob=1.0, long_tail_keep_prob=1.0, seed=1)
    out = list(gate_instruction_corpus(samples, policy))
    assert [s.sample_id for s in out] == [s.sample_id for s in samples]


def test_gate_keep_fraction_binomial_bounds():
    p = 0.1
    n = 10_000
    policy = GatePolicy(no_code_keep_prob=p, seed=7)
    out = list(gate_instruction_corpus(_no_code_samples(n), policy))
    sigma = (p * (1 - p) / n) ** 0.5
    assert abs(len(out) / n - p) <= 3 * sigma


def test_gate_long_tail_discard():
    samples = [build_sample(f"lt{i}", "q", "```ocaml\nlet x = 1\n```")
               for i in range(200)]
    policy = GatePolicy(long_tail_keep_prob=0.0, seed=3)
    drops = []
    out = list(gate_instruction_corpus(samples, policy, drop_log=drops))
    assert out == []
    assert all(d["reason"] == "long-tail-language" for d in drops)


def test_gate_static_check_requirement():
    good = build_sample("g", "q", "```python\nx = 1\n```")
    bad = build_sample("b", "q", "```python\ndef f(:\n```")
    policy = GatePolicy(require_static_check=True, seed=1)
    out = list(gate_instruction_corpus([good, bad], policy))
    assert [s.sample_id for s in out] == ["g"]


def test_gate_deterministic_and_idempotent():
    samples = _no_code_samples(500)
    policy = GatePolicy(no_code_keep_prob=0.3, seed=11)
    once = [s.sample_id for s in gate_instruction_corpus(samples, policy)]
    again = [s.sample_id for s in gate_instruction_corpus(samples, policy)]
    assert once == again
    kept = [s for s in samples if s.sample_id in set(once)]
    twice = [s.sample_id for s in gate_instruction_corpus(kept, policy)]
    assert twice == once
