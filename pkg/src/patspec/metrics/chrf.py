"""chrF: character n-gram F-beta (Popovic 2015), optionally with word n-grams (chrF++)."""

from __future__ import annotations

from collections import Counter

from patspec.metrics.tokenize import tokenize


def _char_ngrams(text: str, n: int) -> Counter:
    s = "".join(text.split())
    return Counter(s[i : i + n] for i in range(len(s) - n + 1))


def _word_ngrams(text: str, n: int) -> Counter:
    toks = tokenize(text)
    return Counter(tuple(toks[i : i + n]) for i in range(len(toks) - n + 1))


def chrf(hyp: str, ref: str, char_n: int = 6, word_n: int = 0, beta: float = 2.0) -> float:
    """Average n-gram precision and recall over orders, combined as F-beta.

    Whitespace is ignored for character n-grams. Orders for which either side
    has no n-grams are skipped; with no usable order the score is 0.
    """
    precisions, recalls = [], []
    grams = [(_char_ngrams, n) for n in range(1, char_n + 1)] + [(_word_ngrams, n) for n in range(1, word_n + 1)]
    for extract, n in grams:
        h, r = extract(hyp, n), extract(ref, n)
        h_total, r_total = sum(h.values()), sum(r.values())
        if h_total == 0 or r_total == 0:
            continue
        match = sum(min(c, r[g]) for g, c in h.items())
        precisions.append(match / h_total)
        recalls.append(match / r_total)
    if not precisions:
        return 0.0
    p = sum(precisions) / len(precisions)
    rc = sum(recalls) / len(recalls)
    if p == 0.0 and rc == 0.0:
        return 0.0
    b2 = beta * beta
    return (1 + b2) * p * rc / (b2 * p + rc)
