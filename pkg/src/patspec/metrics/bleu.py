"""BLEU (Papineni et al.) with brevity penalty.

Corpus BLEU pools clipped n-gram counts over all segments. Sentence BLEU
applies add-one smoothing to orders with zero matches, so short or loosely
related pairs still get a graded score.
"""

from __future__ import annotations

import math
from collections import Counter
from collections.abc import Sequence

from patspec.metrics.tokenize import ngrams, tokenize


def _stats(hyp: list[str], ref: list[str], max_n: int) -> tuple[list[int], list[int]]:
    matches, totals = [], []
    for n in range(1, max_n + 1):
        h = Counter(ngrams(hyp, n))
        r = Counter(ngrams(ref, n))
        matches.append(sum(min(c, r[g]) for g, c in h.items()))
        totals.append(max(len(hyp) - n + 1, 0))
    return matches, totals


def _brevity_penalty(hyp_len: int, ref_len: int) -> float:
    if hyp_len >= ref_len:
        return 1.0
    return math.exp(1.0 - ref_len / hyp_len)


def sentence_bleu_tokens(hyp: list[str], ref: list[str], max_n: int = 4) -> float:
    if not hyp or not ref:
        return 0.0
    matches, totals = _stats(hyp, ref, max_n)
    log_sum = 0.0
    for m, t in zip(matches, totals):
        if m == 0:
            m, t = 1, t + 1
        log_sum += math.log(m / t)
    return _brevity_penalty(len(hyp), len(ref)) * math.exp(log_sum / max_n)


def sentence_bleu(hyp: str, ref: str, max_n: int = 4) -> float:
    """Smoothed BLEU-``max_n`` of one hypothesis against one reference, in [0, 1]."""
    return sentence_bleu_tokens(tokenize(hyp), tokenize(ref), max_n)


def corpus_bleu(hyps: Sequence[str], refs: Sequence[str], max_n: int = 4) -> float:
    if len(hyps) != len(refs):
        raise ValueError("hyps and refs differ in length")
    matches = [0] * max_n
    totals = [0] * max_n
    hyp_len = ref_len = 0
    for h, r in zip(hyps, refs):
        ht, rt = tokenize(h), tokenize(r)
        m, t = _stats(ht, rt, max_n)
        matches = [a + b for a, b in zip(matches, m)]
        totals = [a + b for a, b in zip(totals, t)]
        hyp_len += len(ht)
        ref_len += len(rt)
    if hyp_len == 0 or any(m == 0 for m in matches):
        return 0.0
    log_sum = sum(math.log(m / t) for m, t in zip(matches, totals))
    return _brevity_penalty(hyp_len, ref_len) * math.exp(log_sum / max_n)


def bleu(hyps: Sequence[str] | str, refs: Sequence[str] | str, max_n: int = 4) -> float:
    """Corpus BLEU for lists, smoothed sentence BLEU for a single string pair."""
    if isinstance(hyps, str) and isinstance(refs, str):
        return sentence_bleu(hyps, refs, max_n)
    return corpus_bleu(list(hyps), list(refs), max_n)
