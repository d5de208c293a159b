import random

import pytest

from codeprep.decontam import (
    build_index,
    filter_corpus,
    normalize_words,
    scan,
)
from codeprep.ingest import SourceDocument


def make_doc(content, path="a.py"):
    return SourceDocument.build(repo="r", path=path, content=content, domain="code")


def test_normalize_words_stated_rule():
    assert normalize_words("def Foo(x):\n  return x+1") == \
        ["def", "foo", "x", "return", "x", "1"]


def test_normalize_words_empty():
    assert normalize_words("") == []


def test_normalize_words_matches_naive_scanner():
    rng = random.Random(21)
    alphabet = "abZ_9 .,;\n\t-+éμ"
    for _ in range(500):
        text = "".join(rng.choices(alphabet, k=rng.randint(0, 80)))
        # oracle: character-by-character scanner
        words, cur = [], []
        for ch in text.lower():
            if ch.isalnum() or ch == "_":
                cur.append(ch)
            elif cur:
                words.append("".join(cur))
                cur = []
        if cur:
            words.append("".join(cur))
        assert normalize_words(text) == words


def test_index_single_window():
    index = build_index([("bench", "one two three four five six seven eight nine ten")], n=10)
    assert len(index) == 1


def test_index_below_window_length():
    index = build_index([("bench", "one two three four five six seven eight nine")], n=10)
    assert len(index) == 0


def _random_words(rng, n):
    return [f"w{rng.randint(0, 50)}" for _ in range(n)]


def test_index_size_matches_window_enumeration():
    rng = random.Random(22)
    n = 5
    docs = [("b", " ".join(_random_words(rng, rng.randint(0, 30)))) for _ in range(100)]
    index = build_index(docs, n=n)
    windows = set()
    for _, text in docs:
        words = normalize_words(text)
        for i in range(len(words) - n + 1):
            windows.add(tuple(words[i:i + n]))
    assert len(index.fingerprints) == len(windows)


def test_exact_containment_flags():
    sentence = "the quick brown fox jumps over the lazy dog today"
    index = build_index([("bench", sentence)], n=10)
    doc = make_doc(f"prefix words here {sentence} suffix words")
    report = scan(doc, index)
    assert report.flagged
    assert len(report.matches) == 1
    assert report.matches[0][0] == "bench"


def test_nine_word_overlap_not_flagged():
    test_text = "alpha beta gamma delta epsilon zeta eta theta iota kappa"
    index = build_index([("bench", test_text)], n=10)
    # only the first 9 words shared, then diverge
    doc = make_doc("alpha beta gamma delta epsilon zeta eta theta iota DIFFERENT")
    assert not scan(doc, index).flagged


def test_filter_empty_index_noop():
    docs = [make_doc(f"doc number {i} content", f"f{i}.py") for i in range(5)]
    index = build_index([], n=10)
    assert [d.doc_id for d in filter_corpus(docs, index)] == [d.doc_id for d in docs]


def test_filter_total_removal():
    docs = [make_doc("one two three four five six seven eight nine ten extra",
                     f"f{i}.py") for i in range(3)]
    index = build_index([("b", "one two three four five six seven eight nine ten")], n=10)
    assert list(filter_corpus(docs, index)) == []


def test_randomized_corpus_matches_bruteforce_oracle():
    rng = random.Random(23)
    n = 10
    test_docs = [("b%d" % i, " ".join(_random_words(rng, rng.randint(5, 40))))
                 for i in range(20)]
    index = build_index(test_docs, n=n)

    corpus = []
    for i in range(300):
        words = _random_words(rng, rng.randint(0, 60))
        src = normalize_words(rng.choice(test_docs)[1])
        if rng.random() < 0.3 and len(src) >= 12:
            # plant an overlap of 8..12 words from a random test doc
            k = rng.randint(8, 12)
            start = rng.randint(0, len(src) - k)
            pos = rng.randint(0, len(words))
            words = words[:pos] + src[start:start + k] + words[pos:]
        corpus.append(make_doc(" ".join(words), f"f{i}.py"))

    # oracle: explicit window-set intersection over strings
    test_windows = set()
    for _, text in test_docs:
        w = normalize_words(text)
        for i in range(len(w) - n + 1):
            test_windows.add(tuple(w[i:i + n]))

    for doc in corpus:
        w = normalize_words(doc.content)
        oracle_flag = any(tuple(w[i:i + n]) in test_windows
                          for i in range(len(w) - n + 1))
        assert scan(doc, index).flagged == oracle_flag


def test_flagging_monotone_under_index_growth():
    rng = random.Random(24)
    base_tests = [("b0", " ".join(_random_words(rng, 30)))]
    docs = [make_doc(" ".join(_random_words(rng, 40)), f"f{i}.py") for i in range(100)]
    small = build_index(base_tests, n=10)
    large = build_index(base_tests + [("b1", docs[0].content),
                                      ("b2", docs[5].content)], n=10)
    for doc in docs:
        if scan(doc, small).flagged:
            assert scan(doc, large).flagged


def test_filter_idempotent():
    rng = random.Random(25)
    tests = [("b", " ".join(_random_words(rng, 30)))]
    docs = [make_doc(" ".join(_random_words(rng, 40)), f"f{i}.py") for i in range(100)]
    index = build_index(tests, n=10)
    once = list(filter_corpus(docs, index))
    twice = list(filter_corpus(once, index))
    assert [d.doc_id for d in once] == [d.doc_id for d in twice]


def test_bad_n():
    with pytest.raises(ValueError):
        build_index([], n=0)
