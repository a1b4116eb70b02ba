import math
import random

import pytest

import oracles
from patspec.errors import DataError, EmptyReference
from patspec.metrics import (
    HashingEmbeddingProvider,
    TableEmbeddingProvider,
    bertscore,
    bleu,
    chrf,
    corpus_bleu,
    evaluate_corpus,
    info_weights,
    meteor,
    nist,
    rouge_l,
    rouge_lsum,
    rouge_n,
    sentence_bleu,
    tokenize,
    wer,
    write_report,
)
from synthetic import metric_pairs

TABLE = {"a": [1.0, 0.0], "b": [0.6, 0.8], "c": [0.0, 1.0]}


def test_tokenize():
    assert tokenize("The CPU, idles.") == ["the", "cpu", ",", "idles", "."]


def test_bleu_examples():
    assert bleu(["a b c d e"], ["a b c d e"]) == 1.0
    assert sentence_bleu("", "the cat") == 0.0
    hyp, ref = "the the the the", "the cat sat down"
    expected = math.exp((math.log(1 / 4) + math.log(1 / 4) + math.log(1 / 3) + math.log(1 / 2)) / 4)
    assert sentence_bleu(hyp, ref) == pytest.approx(expected, abs=1e-12)
    assert sentence_bleu(hyp, ref) == pytest.approx(oracles.bleu_sentence(hyp, ref), abs=1e-12)
    assert corpus_bleu([hyp], [ref]) == oracles.bleu_corpus([hyp], [ref]) == 0.0


def test_rouge_examples():
    r1 = rouge_n("the cat", "the cat sat", 1)
    assert (r1.precision, r1.recall) == (1.0, pytest.approx(2 / 3))
    assert r1.f1 == pytest.approx(0.8)
    text = "FIG. 1 shows a cache 106. The cache holds lines."
    for prf in (rouge_n(text, text, 1), rouge_n(text, text, 2), rouge_l(text, text), rouge_lsum(text, text)):
        assert prf.f1 == pytest.approx(1.0)
    assert rouge_n("alpha beta", "gamma delta", 1).f1 == 0.0
    assert rouge_l("alpha beta", "gamma delta").f1 == 0.0


def test_chrf_examples():
    assert chrf("same text", "same text") == pytest.approx(1.0)
    assert chrf("abc", "xyz") == 0.0
    hand = (3 / 4 + 2 / 3 + 1 / 2 + 0) / 4
    assert chrf("abcd", "abce") == pytest.approx(hand, abs=1e-12)
    assert chrf("abcd", "abce") == pytest.approx(oracles.chrf("abcd", "abce"), abs=1e-12)


def test_meteor_examples():
    assert meteor("the cat sat", "the cat sat") == pytest.approx(1 - 0.5 * (1 / 3) ** 3, abs=1e-12)
    assert meteor("cat", "cat") == pytest.approx(0.5, abs=1e-12)
    assert meteor("alpha", "beta") == 0.0
    assert meteor("caches stored", "cache storing") == pytest.approx(oracles.meteor("caches stored", "cache storing"), abs=1e-12)


def test_nist_examples():
    refs = ["the cat sat", "the dog ran"]
    weights = info_weights(refs)
    assert weights[("the",)] == pytest.approx(math.log2(3))
    assert weights[("cat",)] == pytest.approx(math.log2(6))
    assert weights[("the", "cat")] == pytest.approx(1.0)
    assert weights[("cat", "sat")] == 0.0
    expected = (math.log2(3) + 2 * math.log2(6)) / 3 + 1 / 2
    assert nist(["the cat sat"], ["the cat sat"], weights=weights) == pytest.approx(expected, abs=1e-12)
    assert nist(refs, refs) == pytest.approx(oracles.nist(refs, refs), abs=1e-12)
    assert nist([""], ["the cat"]) == 0.0
    assert nist(["zebra quokka"], ["the cat"]) == 0.0


def test_wer_examples():
    assert wer("a b c", "a b c") == 0.0
    assert wer("a x c", "a b c d") == 0.5
    assert wer("a b c d e f", "a") == 5.0
    with pytest.raises(EmptyReference):
        wer("something", "")


def test_bertscore_examples():
    table = TableEmbeddingProvider(TABLE)
    assert bertscore("a b", "a b", table).f1 == pytest.approx(1.0)
    assert bertscore("a", "c", table).f1 == 0.0
    s = bertscore("a b", "b c", table)
    assert (s.precision, s.recall) == (pytest.approx(0.8), pytest.approx(0.9))
    assert s.f1 == pytest.approx(2 * 0.8 * 0.9 / 1.7)
    assert s.f1 == pytest.approx(oracles.bertscore_f1("a b", "b c", lambda t: TABLE[t]), abs=1e-12)


def test_bertscore_symmetric_on_permutations():
    provider = HashingEmbeddingProvider()
    rng = random.Random(2)
    for hyp, _ in metric_pairs(20, seed=9):
        words = hyp.split()
        rng.shuffle(words)
        other = " ".join(words)
        assert bertscore(hyp, other, provider).f1 == pytest.approx(bertscore(other, hyp, provider).f1, abs=1e-12)


def test_bounds_and_identities():
    provider = HashingEmbeddingProvider()
    for hyp, ref in metric_pairs(30, seed=3):
        for value in (
            sentence_bleu(hyp, ref),
            rouge_n(hyp, ref, 1).f1,
            rouge_n(hyp, ref, 2).f1,
            rouge_l(hyp, ref).f1,
            rouge_lsum(hyp, ref).f1,
            chrf(hyp, ref),
            meteor(hyp, ref),
            bertscore(hyp, ref, provider).f1,
        ):
            assert 0.0 <= value <= 1.0
        assert wer(hyp, ref) >= 0.0
        assert nist([hyp], [ref]) >= 0.0
        assert wer(ref, ref) == 0.0


def test_evaluate_corpus(tmp_path):
    refs = {"a": "FIG. 1 shows a cache 106.", "b": "The processor 102 runs.", "c": "A bus 10 links nodes."}
    hyps = {"a": "FIG. 1 shows a cache 106.", "b": "The processor runs fast.", "c": "A bus links two nodes."}
    report = evaluate_corpus(hyps, refs, provider=HashingEmbeddingProvider(), jobs=2)
    assert report.per_sample["a"]["bleu"] == pytest.approx(1.0)
    assert report.per_sample["a"]["wer"] == 0.0
    for sid in "bc":
        assert report.per_sample[sid]["rougeL"] == pytest.approx(oracles.rouge_l(hyps[sid], refs[sid]), abs=1e-9)
        assert report.per_sample[sid]["meteor"] == pytest.approx(oracles.meteor(hyps[sid], refs[sid]), abs=1e-9)
    assert report.aggregate["chrf"] == pytest.approx(sum(oracles.chrf(hyps[s], refs[s]) for s in refs) / 3, abs=1e-9)
    assert report.corpus["bleu"] == pytest.approx(oracles.bleu_corpus([hyps[s] for s in "abc"], [refs[s] for s in "abc"]), abs=1e-9)
    assert report.header["meteor"]["variant"] == "meteor-exact+stem"
    assert evaluate_corpus(hyps, refs, provider=HashingEmbeddingProvider()).to_json() == report.to_json()
    path = write_report(report, tmp_path / "report.json")
    assert path.with_suffix(".txt").read_text().startswith("metric")


def test_evaluate_identity_single_sample():
    report = evaluate_corpus({"x": "A cache 106 holds lines."}, {"x": "A cache 106 holds lines."}, provider=HashingEmbeddingProvider())
    agg = report.aggregate
    for name in ("bleu", "rouge1", "rouge2", "rougeL", "rougeLsum", "chrf", "bertscore"):
        assert agg[name] == pytest.approx(1.0)
    assert agg["wer"] == 0.0
    assert "bertscore" not in evaluate_corpus({"x": "a"}, {"x": "a"}).aggregate


def test_evaluate_errors():
    with pytest.raises(DataError):
        evaluate_corpus({}, {})
    with pytest.raises(ValueError):
        evaluate_corpus({"x": "a"}, {"x": "a"}, metrics=["bogus"])
