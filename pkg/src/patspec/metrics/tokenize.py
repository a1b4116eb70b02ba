"""The single tokenizer shared by every word-level metric."""

import re

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")

DESCRIPTION = "lowercase; split into \\w+ runs and single punctuation characters"


def tokenize(text: str) -> list[str]:
    """Lower-case ``text`` and split it into word runs and punctuation marks.

    >>> tokenize("The processor, 102.")
    ['the', 'processor', ',', '102', '.']
    """
    return _TOKEN_RE.findall(text.lower())


def ngrams(tokens: list[str], n: int) -> list[tuple[str, ...]]:
    return [tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]
