"""Word error rate."""

from __future__ import annotations

from patspec.errors import EmptyReference
from patspec.metrics.tokenize import tokenize


def edit_distance(a: list[str], b: list[str]) -> int:
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        cur = [i] + [0] * len(b)
        for j, y in enumerate(b, start=1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y))
        prev = cur
    return prev[-1]


def wer(hyp: str, ref: str) -> float:
    """Word-level Levenshtein distance divided by the reference length; may exceed 1."""
    h, r = tokenize(hyp), tokenize(ref)
    if not r:
        if not h:
            return 0.0
        raise EmptyReference("reference has no tokens")
    return edit_distance(h, r) / len(r)
