import json

import httpx
import pytest

from patspec import cli as cli_mod
from patspec.cli import main


@pytest.fixture(scope="module")
def staged(corpus_dir, tmp_path_factory):
    """Run every stage through the CLI once; later tests read the outputs."""
    d = tmp_path_factory.mktemp("cli")
    steps = [
        ["ingest", "--format", "plain", "--in", str(corpus_dir), "--out", str(d / "corpus.jsonl")],
        ["align", "--in", str(d / "corpus.jsonl"), "--out", str(d / "aligned.jsonl")],
        ["enrich", "--in", str(d / "aligned.jsonl"), "--corpus", str(d / "corpus.jsonl"), "--out", str(d / "enriched.jsonl"),
         "--tokens-manifest", str(d / "tokens.txt")],
        ["imageprep", "--in", str(corpus_dir), "--out", str(d / "images"), "--max-dim", "256", "--jobs", "2"],
        ["dataset", "emit", "--in", str(d / "enriched.jsonl"), "--images", str(d / "images"), "--out", str(d / "samples.jsonl")],
        ["dataset", "split", "--in", str(d / "samples.jsonl"), "--out-dir", str(d / "split"), "--test-size", "4", "--seed", "3",
         "--lora-rank", "8"],
        ["generate", "--samples", str(d / "split" / "test.jsonl"), "--image-root", str(d), "--n", "3",
         "--mock-template", "{desc} {comps} {cf}", "--out", str(d / "gens.jsonl")],
        ["rank", "--gens", str(d / "gens.jsonl"), "--samples", str(d / "split" / "test.jsonl"), "--out", str(d / "selected.jsonl")],
        ["evaluate", "--hyp", str(d / "selected.jsonl"), "--ref", str(d / "split" / "test.jsonl"), "--out", str(d / "report.json")],
    ]  # fmt: skip
    codes = [main(step) for step in steps]
    return d, codes


def _lines(path):
    return [json.loads(line) for line in path.read_text().splitlines()]


def test_stage_chain_succeeds(staged):
    d, codes = staged
    assert codes == [0] * len(codes)
    assert len(_lines(d / "corpus.jsonl")) == 3
    assert len(_lines(d / "aligned.jsonl")) == 12
    assert len(_lines(d / "samples.jsonl")) == 12
    manifest = json.loads((d / "split" / "dataset_manifest.json").read_text())
    assert (manifest["train_size"], manifest["test_size"], manifest["lora_rank"]) == (8, 4, 8)
    gens = _lines(d / "gens.jsonl")
    assert len(gens) == 4 and all(len(g["candidates"]) == 3 and g["error"] is None for g in gens)
    assert (d / "gens.audit.jsonl").exists()
    report = json.loads((d / "report.json").read_text())
    assert report["counts"]["samples"] == 4
    assert (d / "report.txt").exists()


def test_imageprep_report(staged):
    d, _ = staged
    metas = _lines(d / "images" / "imageprep.jsonl")
    assert metas and all(max(m["height"], m["width"]) == 256 for m in metas)


def test_usage_errors(tmp_path, corpus_dir):
    assert main(["ingest", "--format", "plain"]) == 1
    assert main(["imageprep", "--in", str(corpus_dir), "--out", str(tmp_path), "--max-dim", "300"]) == 1
    assert main(["rank", "--gens", str(corpus_dir / "US10000001.txt"), "--samples", str(corpus_dir / "US10000001.txt"),
                 "--out", str(tmp_path / "x"), "--weights", "1,2"]) == 1  # fmt: skip
    assert main(["pipeline", "--out-dir", str(tmp_path), "--set", "nonsense"]) == 1
    assert main(["bogus-command"]) == 1


def test_data_errors(tmp_path, staged):
    d, _ = staged
    assert main(["pipeline", "--out-dir", str(tmp_path / "run"), "--corpus", str(tmp_path / "missing")]) == 2
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"sample_id": "x"}\n')
    assert main(["rank", "--gens", str(d / "gens.jsonl"), "--samples", str(bad), "--out", str(tmp_path / "s.jsonl")]) == 2
    assert main(["dataset", "split", "--in", str(d / "samples.jsonl"), "--out-dir", str(tmp_path / "s"), "--test-size", "50"]) == 2


def test_endpoint_error_exit_code(tmp_path, staged, monkeypatch):
    d, _ = staged
    ep = tmp_path / "ep.json"
    ep.write_text(json.dumps({"base_url": "http://127.0.0.1:9", "model": "m", "max_attempts": 1, "timeout": 1}))

    def refuse(request):
        raise httpx.ConnectError("refused", request=request)

    real_client = cli_mod.pl.GenerationClient

    def client_with_refusal(endpoint, **kw):
        kw["transport"] = httpx.MockTransport(refuse)
        return real_client(endpoint, **kw)

    monkeypatch.setattr(cli_mod.pl, "GenerationClient", client_with_refusal)
    code = main(["generate", "--samples", str(d / "split" / "test.jsonl"), "--image-root", str(d), "--endpoint", str(ep),
                 "--out", str(tmp_path / "g.jsonl")])  # fmt: skip
    assert code == 3
