"""Corpus evaluation: per-sample scores, arithmetic-mean aggregates, corpus BLEU/NIST."""

from __future__ import annotations

import json
import math
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from pydantic import BaseModel, ConfigDict

from patspec.errors import DataError
from patspec.metrics import tokenize as tok
from patspec.metrics.bertscore import EmbeddingProvider, bertscore
from patspec.metrics.bleu import corpus_bleu, sentence_bleu
from patspec.metrics.chrf import chrf
from patspec.metrics.meteor import VARIANT as METEOR_VARIANT
from patspec.metrics.meteor import meteor
from patspec.metrics.nist import info_weights, nist
from patspec.metrics.rouge import rouge_l, rouge_lsum, rouge_n
from patspec.metrics.wer import wer

ALL_METRICS = ("bleu", "rouge1", "rouge2", "rougeL", "rougeLsum", "chrf", "meteor", "nist", "wer", "bertscore")
UNBOUNDED = {"nist", "wer"}


class MetricReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    header: dict[str, object]
    per_sample: dict[str, dict[str, float]]
    aggregate: dict[str, float]
    corpus: dict[str, float]
    counts: dict[str, int]

    def to_json(self) -> str:
        return json.dumps(self.model_dump(), indent=2, sort_keys=False) + "\n"

    def to_table(self) -> str:
        names = [m for m in ALL_METRICS if m in self.aggregate]
        width = max(len(n) for n in names + ["corpus bleu"]) + 2
        lines = [f"{'metric':<{width}}{'mean':>10}", "-" * (width + 10)]
        lines += [f"{n:<{width}}{self.aggregate[n]:>10.4f}" for n in names]
        lines += [f"{'corpus ' + n:<{width}}{v:>10.4f}" for n, v in self.corpus.items()]
        lines.append(f"{'samples':<{width}}{self.counts['samples']:>10d}")
        return "\n".join(lines) + "\n"


def _score_pair(hyp: str, ref: str, metrics: Sequence[str], weights, provider) -> dict[str, float]:
    out: dict[str, float] = {}
    for m in metrics:
        if m == "bleu":
            out[m] = sentence_bleu(hyp, ref)
        elif m == "rouge1":
            out[m] = rouge_n(hyp, ref, 1).f1
        elif m == "rouge2":
            out[m] = rouge_n(hyp, ref, 2).f1
        elif m == "rougeL":
            out[m] = rouge_l(hyp, ref).f1
        elif m == "rougeLsum":
            out[m] = rouge_lsum(hyp, ref).f1
        elif m == "chrf":
            out[m] = chrf(hyp, ref)
        elif m == "meteor":
            out[m] = meteor(hyp, ref)
        elif m == "nist":
            out[m] = nist([hyp], [ref], weights=weights)
        elif m == "wer":
            out[m] = wer(hyp, ref)
        elif m == "bertscore":
            out[m] = bertscore(hyp, ref, provider).f1
    return out


def evaluate_corpus(
    hyps: Mapping[str, str],
    refs: Mapping[str, str],
    metrics: Sequence[str] = ALL_METRICS,
    provider: EmbeddingProvider | None = None,
    jobs: int = 1,
) -> MetricReport:
    """Score every sample id present in both mappings.

    Aggregates are arithmetic means summed in sample-id order, so the report
    is deterministic regardless of ``jobs``. BERTScore is skipped when no
    provider is given.
    """
    unknown = [m for m in metrics if m not in ALL_METRICS]
    if unknown:
        raise ValueError(f"unknown metrics: {unknown}")
    metrics = [m for m in ALL_METRICS if m in metrics and (m != "bertscore" or provider is not None)]
    ids = sorted(set(hyps) & set(refs))
    if not ids:
        raise DataError("no sample has both a hypothesis and a reference")
    weights = info_weights([refs[i] for i in ids]) if "nist" in metrics else None

    def work(sid: str) -> dict[str, float]:
        return _score_pair(hyps[sid], refs[sid], metrics, weights, provider)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            scores = list(pool.map(work, ids))
    else:
        scores = [work(i) for i in ids]
    per_sample = dict(zip(ids, scores))
    aggregate = {m: math.fsum(s[m] for s in scores) / len(scores) for m in metrics}
    corpus = {}
    if "bleu" in metrics:
        corpus["bleu"] = corpus_bleu([hyps[i] for i in ids], [refs[i] for i in ids])
    if "nist" in metrics:
        corpus["nist"] = nist([hyps[i] for i in ids], [refs[i] for i in ids], weights=weights)
    header = {
        "tokenizer": tok.DESCRIPTION,
        "metrics": list(metrics),
        "bleu": {"max_n": 4, "sentence_smoothing": "add-one on zero-match orders", "corpus_smoothing": None},
        "rouge": {"f": "beta=1", "lsum_sentence_split": "figure-safe sentence splitter"},
        "chrf": {"char_n": 6, "word_n": 0, "beta": 2.0, "whitespace": False},
        "meteor": {"variant": METEOR_VARIANT, "alpha": 0.9, "beta": 3.0, "gamma": 0.5},
        "nist": {"max_n": 5, "info_weights": "evaluation reference corpus"},
        "wer": {"unit": "shared tokenizer tokens"},
        "bertscore": {"provider": provider.name if provider is not None else None, "rescale_with_baseline": False},
    }
    counts = {
        "samples": len(ids),
        "missing_hypotheses": len(set(refs) - set(hyps)),
        "unmatched_hypotheses": len(set(hyps) - set(refs)),
    }
    return MetricReport(header=header, per_sample=per_sample, aggregate=aggregate, corpus=corpus, counts=counts)


def write_report(report: MetricReport, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(report.to_json(), encoding="utf-8")
    path.with_suffix(".txt").write_text(report.to_table(), encoding="utf-8")
    return path
