"""BERTScore-style greedy matching over pluggable token embeddings.

The neural encoder is not bundled. Any object with a ``name`` and an
``embed(tokens) -> array[len(tokens), dim]`` method can serve as provider.
No baseline rescaling is applied; raw cosine scores are reported.
"""

from __future__ import annotations

import hashlib
from typing import Protocol, runtime_checkable

import numpy as np

from patspec.metrics.rouge import PRF
from patspec.metrics.tokenize import tokenize


@runtime_checkable
class EmbeddingProvider(Protocol):
    name: str

    def embed(self, tokens: list[str]) -> np.ndarray: ...


class HashingEmbeddingProvider:
    """Deterministic, offline, context-free token vectors.

    Each token is the sum of signed hashed character trigrams (with boundary
    markers), so related word forms share features. Useful for tests and for
    running the metric suite without an encoder.
    """

    def __init__(self, dim: int = 64):
        self.dim = dim
        self.name = f"hashing-trigram-{dim}"
        self._cache: dict[str, np.ndarray] = {}

    def _vector(self, token: str) -> np.ndarray:
        vec = self._cache.get(token)
        if vec is None:
            vec = np.zeros(self.dim)
            padded = f"<{token}>"
            for i in range(max(len(padded) - 2, 1)):
                digest = hashlib.blake2b(padded[i : i + 3].encode(), digest_size=8).digest()
                h = int.from_bytes(digest, "little")
                vec[h % self.dim] += 1.0 if (h >> 32) & 1 else -1.0
            if not vec.any():
                vec[0] = 1.0
            self._cache[token] = vec
        return vec

    def embed(self, tokens: list[str]) -> np.ndarray:
        if not tokens:
            return np.zeros((0, self.dim))
        return np.stack([self._vector(t) for t in tokens])


class TableEmbeddingProvider:
    """Look up vectors from a fixed token -> vector table."""

    def __init__(self, table: dict[str, list[float]], name: str = "table"):
        self.table = {k: np.asarray(v, dtype=float) for k, v in table.items()}
        self.name = name

    def embed(self, tokens: list[str]) -> np.ndarray:
        return np.stack([self.table[t] for t in tokens])


def similarity_matrix(h: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarity, clipped to [-1, 1].

    Bit-identical non-zero vectors are set to exactly 1.0; BLAS rounding
    would otherwise leave them an ulp short.
    """
    cross = h @ r.T
    hn = np.einsum("ij,ij->i", h, h)
    rn = np.einsum("ij,ij->i", r, r)
    denom = np.sqrt(np.outer(hn, rn))
    safe = np.where(denom > 0, denom, 1.0)
    sim = np.where(denom > 0, cross / safe, 0.0)
    same = (h[:, None, :] == r[None, :, :]).all(axis=2) & (denom > 0)
    sim[same] = 1.0
    return np.clip(sim, -1.0, 1.0)


def bertscore(hyp: str, ref: str, provider: EmbeddingProvider) -> PRF:
    """Greedy matching: each token takes its best cosine partner on the other side."""
    ht, rt = tokenize(hyp), tokenize(ref)
    if not ht or not rt:
        return PRF(0.0, 0.0, 0.0)
    h = np.asarray(provider.embed(ht), dtype=float)
    r = np.asarray(provider.embed(rt), dtype=float)
    if h.ndim != 2 or r.ndim != 2 or h.shape[1] != r.shape[1]:
        raise ValueError("provider must return (tokens, dim) arrays of one dimension")
    sim = similarity_matrix(h, r)
    precision = float(sum(sim.max(axis=1).tolist()) / len(ht))
    recall = float(sum(sim.max(axis=0).tolist()) / len(rt))
    if precision + recall <= 0:
        return PRF(precision, recall, 0.0)
    return PRF(precision, recall, 2 * precision * recall / (precision + recall))
