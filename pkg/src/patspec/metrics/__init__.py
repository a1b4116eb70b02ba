"""Natural-language-generation metrics used to score generated paragraphs."""

from patspec.metrics.bertscore import EmbeddingProvider, HashingEmbeddingProvider, TableEmbeddingProvider, bertscore
from patspec.metrics.bleu import bleu, corpus_bleu, sentence_bleu
from patspec.metrics.chrf import chrf
from patspec.metrics.meteor import meteor
from patspec.metrics.nist import info_weights, nist
from patspec.metrics.report import ALL_METRICS, MetricReport, evaluate_corpus, write_report
from patspec.metrics.rouge import PRF, rouge_l, rouge_lsum, rouge_n
from patspec.metrics.tokenize import tokenize
from patspec.metrics.wer import wer

__all__ = [
    "ALL_METRICS",
    "EmbeddingProvider",
    "HashingEmbeddingProvider",
    "MetricReport",
    "PRF",
    "TableEmbeddingProvider",
    "bertscore",
    "bleu",
    "chrf",
    "corpus_bleu",
    "evaluate_corpus",
    "info_weights",
    "meteor",
    "nist",
    "rouge_l",
    "rouge_lsum",
    "rouge_n",
    "sentence_bleu",
    "tokenize",
    "wer",
    "write_report",
]
