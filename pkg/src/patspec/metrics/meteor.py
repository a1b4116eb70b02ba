"""METEOR restricted to exact and stem unigram matches ("meteor-exact+stem").

No synonym or paraphrase tables are used. Alignment is staged: exact
matches first, then stem matches among the still-unmatched words. Within a
stage each hypothesis word, left to right, takes the leftmost free reference
word with the same key.
"""

from __future__ import annotations

from collections.abc import Callable

from patspec.metrics.tokenize import tokenize

VARIANT = "meteor-exact+stem"

_SUFFIXES = (
    ("ational", "ate"),
    ("ization", "ize"),
    ("iveness", "ive"),
    ("fulness", "ful"),
    ("ousness", "ous"),
    ("sses", "ss"),
    ("ies", "y"),
    ("ing", ""),
    ("edly", ""),
    ("ed", ""),
    ("ly", ""),
    ("ment", ""),
    ("es", ""),
    ("s", ""),
)


def stem(word: str) -> str:
    """Strip one common English suffix, keeping a stem of at least three letters."""
    for suffix, repl in _SUFFIXES:
        if word.endswith(suffix) and len(word) - len(suffix) >= 3:
            if suffix == "s" and word.endswith("ss"):
                return word
            return word[: -len(suffix)] + repl
    return word


def align(hyp: list[str], ref: list[str], stages: tuple[Callable[[str], str], ...] | None = None) -> list[tuple[int, int]]:
    """Return (hyp_index, ref_index) matches sorted by hypothesis position."""
    if stages is None:
        stages = (lambda w: w, stem)
    h_free = [True] * len(hyp)
    r_free = [True] * len(ref)
    matches = []
    for key in stages:
        ref_keys = [key(w) for w in ref]
        for i, w in enumerate(hyp):
            if not h_free[i]:
                continue
            k = key(w)
            for j, rk in enumerate(ref_keys):
                if r_free[j] and rk == k:
                    h_free[i] = r_free[j] = False
                    matches.append((i, j))
                    break
    return sorted(matches)


def count_chunks(matches: list[tuple[int, int]]) -> int:
    chunks = 0
    prev = None
    for i, j in matches:
        if prev is None or i != prev[0] + 1 or j != prev[1] + 1:
            chunks += 1
        prev = (i, j)
    return chunks


def meteor(hyp: str, ref: str, alpha: float = 0.9, beta: float = 3.0, gamma: float = 0.5) -> float:
    """Harmonic F-mean weighted toward recall, times the fragmentation penalty.

    ``score = fmean * (1 - gamma * (chunks / matches) ** beta)``. Identical
    inputs of m tokens score ``1 - gamma * (1/m) ** beta``, not 1.
    """
    h, r = tokenize(hyp), tokenize(ref)
    if not h or not r:
        return 0.0
    matches = align(h, r)
    m = len(matches)
    if m == 0:
        return 0.0
    p = m / len(h)
    rc = m / len(r)
    # alpha*p + (1-alpha)*rc rearranged so that p == rc gives exactly p
    fmean = p * rc / (rc + alpha * (p - rc))
    penalty = gamma * (count_chunks(matches) / m) ** beta
    return fmean * (1.0 - penalty)
