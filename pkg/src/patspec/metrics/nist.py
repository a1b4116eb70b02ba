"""NIST (Doddington 2002): information-weighted n-gram co-occurrence.

Information weights come from n-gram counts over the reference corpus of the
evaluation run: ``info(w1..wn) = log2(count(w1..wn-1) / count(w1..wn))``,
where the count of the empty prefix is the number of reference words.
"""

from __future__ import annotations

import math
from collections import Counter
from collections.abc import Sequence

from patspec.metrics.tokenize import ngrams, tokenize

# brevity factor is 0.5 when the hypothesis is 2/3 of the reference length
BETA = math.log(0.5) / math.log(1.5) ** 2


def info_weights(refs: Sequence[str], max_n: int = 5) -> dict[tuple[str, ...], float]:
    counts: Counter = Counter()
    total_words = 0
    for r in refs:
        toks = tokenize(r)
        total_words += len(toks)
        for n in range(1, max_n + 1):
            counts.update(ngrams(toks, n))
    weights = {}
    for gram, c in counts.items():
        prefix = counts[gram[:-1]] if len(gram) > 1 else total_words
        weights[gram] = math.log2(prefix / c)
    return weights


def nist(
    hyps: Sequence[str] | str,
    refs: Sequence[str] | str,
    max_n: int = 5,
    weights: dict[tuple[str, ...], float] | None = None,
) -> float:
    """Corpus NIST score (>= 0, unbounded). ``weights`` defaults to ``info_weights(refs)``."""
    if isinstance(hyps, str):
        hyps = [hyps]
    if isinstance(refs, str):
        refs = [refs]
    if len(hyps) != len(refs):
        raise ValueError("hyps and refs differ in length")
    if weights is None:
        weights = info_weights(refs, max_n)
    gained = [0.0] * max_n
    totals = [0] * max_n
    hyp_len = ref_len = 0
    for h, r in zip(hyps, refs):
        ht, rt = tokenize(h), tokenize(r)
        hyp_len += len(ht)
        ref_len += len(rt)
        for n in range(1, max_n + 1):
            hc = Counter(ngrams(ht, n))
            rc = Counter(ngrams(rt, n))
            totals[n - 1] += sum(hc.values())
            for gram in sorted(hc):
                hit = min(hc[gram], rc[gram])
                if hit:
                    gained[n - 1] += hit * weights.get(gram, 0.0)
    if hyp_len == 0 or ref_len == 0:
        return 0.0
    score = sum(g / t for g, t in zip(gained, totals) if t)
    ratio = min(hyp_len / ref_len, 1.0)
    return score * math.exp(BETA * math.log(ratio) ** 2)
