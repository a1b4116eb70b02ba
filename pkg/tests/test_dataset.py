import json
import logging

import pytest

from patspec.align import build_aligned_tuples
from patspec.dataset import (
    attach_images,
    emit_samples,
    read_jsonl,
    split,
    split_manifest,
    to_chat_record,
    write_jsonl,
)
from patspec.errors import DuplicateSampleError, SchemaError, TooFewSamples
from patspec.model import TrainingSample


@pytest.fixture(scope="module")
def aligned(corpus_docs):
    return [t for d in corpus_docs for t in build_aligned_tuples(d)]


@pytest.fixture(scope="module")
def docs(corpus_docs):
    return {d.doc_id: d for d in corpus_docs}


def test_emit_five(aligned, docs):
    samples = emit_samples(aligned[:5], docs)
    assert len(samples) == 5
    assert len({s.sample_id for s in samples}) == 5
    t = aligned[0]
    assert samples[0].sample_id == f"{t.doc_id}#{t.paragraph_ordinal}#{t.claim_feature.claim_number}.{t.claim_feature.index}"
    assert samples[0].prev_paragraph_ordinal == 0
    assert samples[1].prev_paragraph_ordinal == samples[0].cur_paragraph_ordinal
    assert emit_samples(aligned[:5], docs) == samples


def test_emit_duplicate(aligned, docs):
    with pytest.raises(DuplicateSampleError):
        emit_samples([aligned[0], aligned[0]], docs)


def test_emit_require_image(aligned, docs, caplog):
    t = aligned[0]
    doc = docs[t.doc_id]
    drawings = list(doc.drawings)
    drawings[t.drawing_index] = drawings[t.drawing_index].model_copy(update={"image_path": ""})
    patched = dict(docs)
    patched[t.doc_id] = doc.model_copy(update={"drawings": tuple(drawings)})
    with caplog.at_level(logging.WARNING, logger="patspec.dataset"):
        samples = emit_samples([t], patched, require_image=True)
    assert samples == []
    assert len([r for r in caplog.records if r.levelno == logging.WARNING]) == 1
    assert emit_samples([t], patched)[0].image_path == ""


def test_attach_images(aligned, docs, caplog):
    samples = emit_samples(aligned[:2], docs)
    assert [s.image_path for s in samples] == ["US10000001-fig1.png", "US10000001-fig3.png"]
    with caplog.at_level(logging.WARNING, logger="patspec.dataset"):
        out = attach_images(samples, ["US10000001-fig1.png"], prefix="images/")
    assert [s.image_path for s in out] == ["images/US10000001-fig1.png"]
    assert "no preprocessed image" in caplog.text
    lenient = attach_images(samples, [], require_image=False)
    assert [s.image_path for s in lenient] == ["", ""]


def test_split_examples():
    ids = list(range(10))
    a = split(ids, 3, seed=4)
    assert a == split(ids, 3, seed=4)
    train, test = a
    assert len(test) == 3 and sorted(train + test) == ids and not set(train) & set(test)
    with pytest.raises(TooFewSamples):
        split(list(range(5)), 1000)


def test_split_large():
    train, test = split(range(230_000), 1000, seed=0)
    assert (len(train), len(test)) == (229_000, 1000)


def test_split_manifest(aligned, docs):
    samples = emit_samples(aligned, docs)
    train, test = split(samples, 4, seed=1)
    m = split_manifest(train, test, 1, note="x")
    assert (m["seed"], m["train_size"], m["test_size"], m["note"]) == (1, len(samples) - 4, 4, "x")


def test_jsonl_round_trip(aligned, docs, tmp_path):
    samples = emit_samples(aligned, docs)
    records = [samples[i % len(samples)].model_copy(update={"sample_id": f"s{i}"}) for i in range(100)]
    path = tmp_path / "s.jsonl"
    assert write_jsonl(path, records) == 100
    assert read_jsonl(path, TrainingSample) == records
    assert not path.read_bytes().startswith(b"\xef\xbb\xbf")


def test_jsonl_schema_error(aligned, docs, tmp_path):
    good = emit_samples(aligned[:1], docs)[0]
    bad = json.loads(good.model_dump_json())
    del bad["target_text"]
    path = tmp_path / "s.jsonl"
    path.write_text(good.model_dump_json() + "\n" + json.dumps(bad) + "\n")
    with pytest.raises(SchemaError) as info:
        read_jsonl(path, TrainingSample)
    assert info.value.line == 2 and info.value.field == "target_text"
    assert ":2:" in str(info.value) and "target_text" in str(info.value)


def test_jsonl_empty_file(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    assert read_jsonl(path, TrainingSample) == []


def test_chat_record(aligned, docs):
    s = emit_samples(aligned[:1], docs)[0]
    rec = to_chat_record(s, "Describe.")
    assert rec["images"] == [s.image_path]
    assert rec["messages"][0]["content"][0] == {"type": "image"}
    assert rec["messages"][1]["content"][0]["text"] == s.target_enriched
