"""Candidate scoring and top-1 selection.

A candidate's score is a weighted sum of four signals: similarity to the
claim feature and its context, coverage of component names, coverage of
component numbers, and whether it names the right figure (and only that one).
"""

from __future__ import annotations

import re
from collections.abc import Iterable, Mapping, Sequence

from pydantic import Field

from patspec.align import score_pair
from patspec.enrich import remove_tags
from patspec.errors import EmptyCandidates
from patspec.model import ComponentPair, TrainingSample, _Frozen
from patspec.textproc import extract_figure_refs

DEFAULT_WEIGHTS = (0.25, 0.25, 0.25, 0.25)


class RankScore(_Frozen):
    claim_align: float
    name_cov: float
    num_cov: float
    fig_ok: float
    score: float


class Ranked(_Frozen):
    index: int = Field(ge=0)
    candidate: str
    rank: RankScore


def parse_weights(value: str | Sequence[float] | None) -> tuple[float, float, float, float]:
    """Accept ``"c,n,d,f"`` or a 4-sequence of non-negative numbers."""
    if value is None:
        return DEFAULT_WEIGHTS
    parts = [float(x) for x in value.split(",")] if isinstance(value, str) else [float(x) for x in value]
    if len(parts) != 4 or any(w < 0 for w in parts):
        raise ValueError(f"weights must be four non-negative numbers, got {value!r}")
    return tuple(parts)  # type: ignore[return-value]


def _name_present(name: str, text: str) -> bool:
    pattern = r"\s+".join(re.escape(w) for w in name.split())
    return re.search(rf"(?<![A-Za-z0-9-]){pattern}(?![A-Za-z0-9-])", text, re.I) is not None


def _number_present(number: str, text: str) -> bool:
    return re.search(rf"(?<![A-Za-z0-9]){re.escape(number)}(?![A-Za-z0-9])", text) is not None


def name_coverage(text: str, pairs: Sequence[ComponentPair]) -> float:
    if not pairs:
        return 1.0
    return sum(_name_present(p.name, text) for p in pairs) / len(pairs)


def number_coverage(text: str, pairs: Sequence[ComponentPair]) -> float:
    if not pairs:
        return 1.0
    return sum(_number_present(p.number, text) for p in pairs) / len(pairs)


def claim_reference(sample: TrainingSample) -> str:
    return f"{sample.claim_feature.text} {remove_tags(sample.claim_context)}"


def score_candidate(candidate: str, sample: TrainingSample, weights: Sequence[float] = DEFAULT_WEIGHTS) -> RankScore:
    text = remove_tags(candidate)
    claim_align = score_pair(text, claim_reference(sample)).combined
    name_cov = name_coverage(text, sample.component_pairs)
    num_cov = number_coverage(text, sample.component_pairs)
    refs = extract_figure_refs(text)
    fig_ok = 1.0 if refs and refs <= {sample.figure_ref} else 0.0
    wc, wn, wd, wf = weights
    return RankScore(
        claim_align=claim_align,
        name_cov=name_cov,
        num_cov=num_cov,
        fig_ok=fig_ok,
        score=wc * claim_align + wn * name_cov + wd * num_cov + wf * fig_ok,
    )


def rank_candidates(
    candidates: Sequence[str], sample: TrainingSample, weights: Sequence[float] = DEFAULT_WEIGHTS
) -> list[Ranked]:
    """Score every candidate; best first, ties broken by candidate index."""
    weights = parse_weights(weights)
    scored = [Ranked(index=i, candidate=c, rank=score_candidate(c, sample, weights)) for i, c in enumerate(candidates)]
    return sorted(scored, key=lambda r: (-r.rank.score, r.index))


def select_top(ranked: Sequence[Ranked]) -> str:
    if not ranked:
        raise EmptyCandidates("no candidates to select from")
    return ranked[0].candidate


def select_all(
    generations: Iterable[Mapping],
    samples: Mapping[str, TrainingSample],
    weights: Sequence[float] = DEFAULT_WEIGHTS,
) -> tuple[list[dict], list[str]]:
    """Rank each generation record against its sample.

    Returns the selected records and the ids that were skipped (generation
    error, no candidates, or unknown sample).
    """
    selected, skipped = [], []
    for gen in generations:
        sid = gen.get("sample_id", "")
        sample = samples.get(sid)
        if gen.get("error") or not gen.get("candidates") or sample is None:
            skipped.append(sid)
            continue
        ranked = rank_candidates(gen["candidates"], sample, weights)
        top = ranked[0]
        selected.append(
            {
                "sample_id": sid,
                "text": remove_tags(top.candidate),
                "candidate_index": top.index,
                "rank": top.rank.model_dump(),
            }
        )
    return selected, skipped
