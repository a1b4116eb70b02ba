"""ROUGE-N, ROUGE-L and summary-level ROUGE-Lsum over the shared tokenizer."""

from __future__ import annotations

from collections import Counter
from typing import NamedTuple

from patspec.metrics.tokenize import ngrams, tokenize
from patspec.textproc import split_sentences


class PRF(NamedTuple):
    precision: float
    recall: float
    f1: float


def _prf(hits: int, hyp_total: int, ref_total: int) -> PRF:
    if hits == 0 or hyp_total == 0 or ref_total == 0:
        return PRF(0.0, 0.0, 0.0)
    # 2PR/(P+R) written over counts so identical inputs give exactly 1.0
    return PRF(hits / hyp_total, hits / ref_total, 2 * hits / (hyp_total + ref_total))


def rouge_n(hyp: str, ref: str, n: int = 1) -> PRF:
    h = Counter(ngrams(tokenize(hyp), n))
    r = Counter(ngrams(tokenize(ref), n))
    hits = sum(min(c, r[g]) for g, c in h.items())
    return _prf(hits, sum(h.values()), sum(r.values()))


def _lcs_table(a: list[str], b: list[str]) -> list[list[int]]:
    """Suffix table: t[i][j] = LCS length of a[i:] and b[j:]."""
    t = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(len(a) - 1, -1, -1):
        ai, row, below = a[i], t[i], t[i + 1]
        for j in range(len(b) - 1, -1, -1):
            row[j] = below[j + 1] + 1 if ai == b[j] else max(below[j], row[j + 1])
    return t


def lcs_length(a: list[str], b: list[str]) -> int:
    return _lcs_table(a, b)[0][0]


def lcs_indices(ref: list[str], hyp: list[str]) -> list[int]:
    """Positions in ``ref`` of the lexicographically smallest longest common subsequence."""
    t = _lcs_table(ref, hyp)
    out = []
    i = j = 0
    while i < len(ref) and j < len(hyp) and t[i][j] > 0:
        need = t[i][j]
        if ref[i] in hyp[j:]:
            jj = hyp.index(ref[i], j)
            if t[i + 1][jj + 1] + 1 == need:
                out.append(i)
                i, j = i + 1, jj + 1
                continue
        i += 1
    return out


def rouge_l(hyp: str, ref: str) -> PRF:
    h, r = tokenize(hyp), tokenize(ref)
    return _prf(lcs_length(h, r), len(h), len(r))


def rouge_lsum(hyp: str, ref: str) -> PRF:
    """Summary-level LCS: union of per-sentence LCS hits, clipped by token counts."""
    hyp_sents = [tokenize(s) for s in split_sentences(hyp)]
    ref_sents = [tokenize(s) for s in split_sentences(ref)]
    hyp_sents = [s for s in hyp_sents if s]
    ref_sents = [s for s in ref_sents if s]
    hyp_total = sum(len(s) for s in hyp_sents)
    ref_total = sum(len(s) for s in ref_sents)
    ref_left = Counter(t for s in ref_sents for t in s)
    hyp_left = Counter(t for s in hyp_sents for t in s)
    hits = 0
    for r in ref_sents:
        union: set[int] = set()
        for h in hyp_sents:
            union.update(lcs_indices(r, h))
        for k in sorted(union):
            tok = r[k]
            if ref_left[tok] > 0 and hyp_left[tok] > 0:
                hits += 1
                ref_left[tok] -= 1
                hyp_left[tok] -= 1
    return _prf(hits, hyp_total, ref_total)
