"""Acceptance criteria; the terminal summary prints one PASS/FAIL line per criterion."""

import random
import time
from pathlib import Path

import pytest
from PIL import Image, ImageDraw

import oracles
from patspec.align import build_aligned_tuples, match_paragraph_to_claim, strip_foreign_figure_sentences
from patspec.dataset import split
from patspec.enrich import strip_tags, tag_text
from patspec.errors import EmptyResult
from patspec.imageprep import ABLATION_SIZES, batch_normalize
from patspec.ingest import RawPatentFile, parse_document
from patspec.metrics import (
    TableEmbeddingProvider,
    bertscore,
    chrf,
    corpus_bleu,
    meteor,
    nist,
    rouge_l,
    rouge_lsum,
    rouge_n,
    sentence_bleu,
    tokenize,
    wer,
)
from patspec.metrics.bertscore import HashingEmbeddingProvider
from patspec.pipeline import PipelineConfig, run_pipeline
from patspec.rank import rank_candidates, select_top
from patspec.textproc import STOPWORDS, extract_figure_refs
from synthetic import claim_features, figure_paragraph, metric_pairs, paragraph_text, ranking_fixture

FIXTURES = Path(__file__).parent / "fixtures"
acceptance = pytest.mark.acceptance


@pytest.fixture(scope="module")
def all_docs(corpus_docs):
    xml = parse_document(RawPatentFile.load(FIXTURES / "US20230000042A1.xml", "uspto_xml"))
    return [*corpus_docs, xml]


@acceptance(number=1, title="metric-oracle equivalence (50 pairs, 1e-9, < 5 s)")
def test_metric_oracle_equivalence():
    start = time.perf_counter()
    pairs = metric_pairs(50, seed=7)
    provider = HashingEmbeddingProvider()
    hyps = [h for h, _ in pairs]
    refs = [r for _, r in pairs]
    for hyp, ref in pairs:
        assert sentence_bleu(hyp, ref) == pytest.approx(oracles.bleu_sentence(hyp, ref), abs=1e-9)
        assert rouge_n(hyp, ref, 1).f1 == pytest.approx(oracles.rouge_n(hyp, ref, 1), abs=1e-9)
        assert rouge_n(hyp, ref, 2).f1 == pytest.approx(oracles.rouge_n(hyp, ref, 2), abs=1e-9)
        assert rouge_l(hyp, ref).f1 == pytest.approx(oracles.rouge_l(hyp, ref), abs=1e-9)
        assert rouge_lsum(hyp, ref).f1 == pytest.approx(oracles.rouge_lsum(hyp, ref), abs=1e-9)
        assert chrf(hyp, ref) == pytest.approx(oracles.chrf(hyp, ref), abs=1e-9)
        assert meteor(hyp, ref) == pytest.approx(oracles.meteor(hyp, ref), abs=1e-9)
        assert nist([hyp], [ref]) == pytest.approx(oracles.nist([hyp], [ref]), abs=1e-9)
        assert wer(hyp, ref) == pytest.approx(oracles.wer(hyp, ref), abs=1e-9)
        vec = lambda t: provider.embed([t])[0].tolist()  # noqa: E731
        assert bertscore(hyp, ref, provider).f1 == pytest.approx(oracles.bertscore_f1(hyp, ref, vec), abs=1e-9)
    assert corpus_bleu(hyps, refs) == pytest.approx(oracles.bleu_corpus(hyps, refs), abs=1e-9)
    assert nist(hyps, refs) == pytest.approx(oracles.nist(hyps, refs), abs=1e-9)
    table = TableEmbeddingProvider({"a": [1, 0], "b": [0.6, 0.8], "c": [0, 1]})
    assert bertscore("a b", "b c", table).f1 == pytest.approx(oracles.bertscore_f1("a b", "b c", lambda t: table.table[t]), abs=1e-9)
    assert time.perf_counter() - start < 5.0


@acceptance(number=2, title="identity suite on 20 corpus paragraphs")
def test_identity_suite(all_docs):
    texts = [p.text for d in all_docs for p in d.paragraphs] + [b.text for d in all_docs for b in d.brief_descriptions]
    texts = texts[:20]
    assert len(texts) == 20
    provider = HashingEmbeddingProvider()
    for x in texts:
        assert sentence_bleu(x, x) == 1.0
        assert corpus_bleu([x], [x]) == 1.0
        assert rouge_n(x, x, 1).f1 == 1.0
        assert rouge_n(x, x, 2).f1 == 1.0
        assert rouge_l(x, x).f1 == 1.0
        assert rouge_lsum(x, x).f1 == 1.0
        assert chrf(x, x) == 1.0
        assert bertscore(x, x, provider).f1 == 1.0
        assert wer(x, x) == 0.0
        # a single chunk over m matches leaves the fragmentation penalty 0.5 / m**3
        m = len(tokenize(x))
        assert meteor(x, x) == pytest.approx(1 - 0.5 * (1 / m) ** 3, abs=1e-12)


@acceptance(number=3, title="alignment equals exhaustive argmax on 100 fixtures")
def test_alignment_oracle_equivalence():
    ties = 0
    for i in range(100):
        rng = random.Random(500 + i)
        feats = claim_features(rng, rng.randint(1, 50))
        para = paragraph_text(rng)
        score = lambda p, f: oracles.combined_score(p, f.text, STOPWORDS)  # noqa: E731
        expected = oracles.argmax_feature(para, feats, score)
        best, _ = match_paragraph_to_claim(para, feats)
        assert (best.claim_number, best.index) == (expected.claim_number, expected.index)
        top = max(score(para, f) for f in feats)
        ties += sum(score(para, f) == top for f in feats) > 1
    assert ties > 0


@acceptance(number=4, title="combined score is the mean of cosine and BLEU")
def test_combined_score_law(all_docs):
    tuples = [t for d in all_docs for t in build_aligned_tuples(d)]
    assert tuples
    for t in tuples:
        assert t.score.combined == (t.score.cosine + t.score.bleu) / 2
        again = type(t).model_validate_json(t.model_dump_json())
        assert again.score.combined == (again.score.cosine + again.score.bleu) / 2


@acceptance(number=5, title="enrichment round-trip on the mini-corpus")
def test_enrichment_round_trip(corpus_docs):
    count = 0
    for doc in corpus_docs:
        for p in doc.paragraphs:
            tagged = tag_text(p.text, p.component_pairs, p.figure_refs)
            assert strip_tags(tagged) == " ".join(p.text.split())
            count += 1
        for b in doc.brief_descriptions:
            assert strip_tags(tag_text(b.text, [], b.figure_refs)) == " ".join(b.text.split())
    assert count > 0


@acceptance(number=6, title="no foreign figure references after stripping")
def test_foreign_figure_stripping(all_docs):
    checked = 0
    for doc in all_docs:
        for t in build_aligned_tuples(doc):
            assert extract_figure_refs(t.text) <= {t.figure_ref}
            checked += 1
        for p in doc.paragraphs:
            for primary in p.figure_refs:
                try:
                    out = strip_foreign_figure_sentences(p, primary)
                except EmptyResult:
                    continue
                assert extract_figure_refs(out) <= {primary}
                checked += 1
    rng = random.Random(17)
    for _ in range(500):
        p = figure_paragraph(rng)
        for primary in sorted(p.figure_refs):
            try:
                out = strip_foreign_figure_sentences(p, primary)
            except EmptyResult:
                continue
            assert extract_figure_refs(out) <= {primary}
            checked += 1
    assert checked > 500


def _drawing(path: Path, size: tuple[int, int], rng: random.Random) -> None:
    img = Image.new("L", size, 255)
    draw = ImageDraw.Draw(img)
    for _ in range(6):
        x0, x1 = sorted(rng.randrange(size[0]) for _ in range(2))
        y0, y1 = sorted(rng.randrange(size[1]) for _ in range(2))
        draw.rectangle((x0, y0, x1, y1), outline=0)
    img.save(path)


@acceptance(number=7, title="image normalization at every ablation size")
def test_image_normalization(tmp_path):
    rng = random.Random(23)
    src = tmp_path / "src"
    src.mkdir()
    sizes = {}
    for i in range(10):
        size = (rng.randint(40, 3000), rng.randint(40, 3000))
        sizes[f"img{i}.png"] = size
        _drawing(src / f"img{i}.png", size, rng)
    for target in ABLATION_SIZES:
        out = tmp_path / f"out{target}"
        report = batch_normalize(src, out, target, jobs=4)
        assert len(report) == 10 and all(m.status != "error" for m in report)
        for meta in report:
            w, h = sizes[Path(meta.path_in).name]
            with Image.open(meta.path_out) as img:
                ow, oh = img.size
            assert max(ow, oh) == target
            assert abs(ow - w * target / max(w, h)) <= 1
            assert abs(oh - h * target / max(w, h)) <= 1
        before = {p.name: p.read_bytes() for p in out.iterdir()}
        rerun = batch_normalize(out, out, target)
        assert all(m.status == "already_normalized" for m in rerun)
        assert {p.name: p.read_bytes() for p in out.iterdir()} == before


@acceptance(number=8, title="seeded split partitions 230,000 samples")
def test_split_contract():
    ids = [f"s{i}" for i in range(230_000)]
    train, test = split(ids, 1000, seed=42)
    again = split(ids, 1000, seed=42)
    assert (train, test) == again
    assert len(test) == 1000 and len(train) == 229_000
    assert not set(train) & set(test)
    assert set(train) | set(test) == set(ids)


@acceptance(number=9, title="ranking selects the true target in 200 fixtures")
def test_ranking_sanity():
    for i in range(200):
        rng = random.Random(1000 + i)
        sample, target, distractors = ranking_fixture(rng, rng.randint(1, 10))
        candidates = distractors + [target]
        rng.shuffle(candidates)
        assert select_top(rank_candidates(candidates, sample)) == target


@acceptance(number=10, title="end-to-end pipeline is byte-identical across runs (< 60 s)")
def test_end_to_end_determinism(tmp_path):
    start = time.perf_counter()
    runs = []
    for name in ("a", "b"):
        config = PipelineConfig.load(None, {"dataset.test_size": "4", "run.seed": "7"})
        manifest = run_pipeline(config, tmp_path / name)
        assert [s["stage"] for s in manifest["stages"]][-1] == "evaluate"
        runs.append(tmp_path / name)
    for fname in ("samples.jsonl", "selected.jsonl", "report.json"):
        a, b = (r / fname for r in runs)
        assert a.read_bytes() == b.read_bytes(), fname
        assert a.stat().st_size > 0
    assert time.perf_counter() - start < 60.0
