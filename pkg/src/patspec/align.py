"""Align claim features, brief descriptions, drawings and specification paragraphs.

The chain for one document is: keep figure-describing paragraphs, pair each
with a drawing through shared figure numbers, drop sentences about other
figures, then assign the paragraph to the claim feature with the best
average of cosine similarity and sentence BLEU.
"""

from __future__ import annotations

import logging
import math
import warnings
from collections import Counter
from collections.abc import Sequence

from pydantic import Field

from patspec.errors import EmptyResult
from patspec.metrics.bleu import sentence_bleu
from patspec.model import (
    ClaimFeature,
    ComponentPair,
    FigureNumber,
    MatchScore,
    PatentDocument,
    SpecParagraph,
    _Frozen,
)
from patspec.textproc import (
    content_words,
    extract_component_pairs,
    extract_figure_refs,
    first_figure,
    split_sentences,
)

__all__ = [
    "AlignedTuple",
    "filter_figure_paragraphs",
    "strip_foreign_figure_sentences",
    "match_description_to_paragraph",
    "text_cosine",
    "score_pair",
    "match_paragraph_to_claim",
    "extract_component_pairs",
    "build_aligned_tuples",
]

log = logging.getLogger(__name__)


class AlignedTuple(_Frozen):
    """One aligned (claim feature, drawing, paragraph) unit.

    Besides the identifying fields it carries what later stages need without
    re-running alignment: the primary figure, the paragraph text with foreign
    figure sentences removed, and the components found in that text.
    """

    doc_id: str
    claim_feature: ClaimFeature
    paragraph_ordinal: int = Field(gt=0)
    drawing_index: int = Field(ge=0)
    score: MatchScore
    figure_ref: FigureNumber
    text: str
    component_pairs: tuple[ComponentPair, ...] = ()


def filter_figure_paragraphs(doc: PatentDocument) -> list[SpecParagraph]:
    """Keep paragraphs that mention a figure, or share a component with kept text.

    Paragraphs without a figure token are kept when one of their component
    pairs also occurs in a brief description or in another kept paragraph;
    this is evaluated to a fixpoint.
    """
    kept = {p.ordinal for p in doc.paragraphs if extract_figure_refs(p.text)}
    brief_pairs: set[ComponentPair] = set()
    for b in doc.brief_descriptions:
        brief_pairs.update(extract_component_pairs(b.text, {}))
    changed = True
    while changed:
        changed = False
        for p in doc.paragraphs:
            if p.ordinal in kept or not p.component_pairs:
                continue
            others: set[ComponentPair] = set(brief_pairs)
            for q in doc.paragraphs:
                if q.ordinal in kept and q.ordinal != p.ordinal:
                    others.update(q.component_pairs)
            if others.intersection(p.component_pairs):
                kept.add(p.ordinal)
                changed = True
    return [p for p in doc.paragraphs if p.ordinal in kept]


def strip_foreign_figure_sentences(paragraph: SpecParagraph, primary: FigureNumber) -> str:
    """Remove every sentence that refers to a figure other than ``primary``.

    A sentence mentioning the primary figure together with another one is
    removed as well, so the result never references a foreign figure.
    Raises ``EmptyResult`` when nothing survives.
    """
    sentences = split_sentences(paragraph.text)
    kept = [s for s in sentences if extract_figure_refs(s) <= {primary}]
    if not kept:
        raise EmptyResult(f"paragraph {paragraph.ordinal}: no sentence left for FIG. {primary}")
    if len(kept) == len(sentences):
        return paragraph.text
    return " ".join(kept)


def match_description_to_paragraph(doc: PatentDocument, paragraphs: Sequence[SpecParagraph] | None = None) -> dict[int, int]:
    """Map paragraph ordinal -> drawing index through the paragraph's primary figure.

    The primary figure is the first one mentioned in the paragraph. When
    several drawings list it, the lowest drawing index wins. Paragraphs
    without a matching drawing are left out.
    """
    owner: dict[FigureNumber, int] = {}
    for b in doc.brief_descriptions:
        for f in b.figure_refs:
            owner.setdefault(f, b.drawing_index)
    out = {}
    for p in doc.paragraphs if paragraphs is None else paragraphs:
        primary = first_figure(p.text)
        if primary is not None and primary in owner:
            out[p.ordinal] = owner[primary]
    return out


def text_cosine(a: str, b: str) -> float:
    """Cosine of stopword-filtered term-frequency vectors; 0 if either is empty."""
    va, vb = Counter(content_words(a)), Counter(content_words(b))
    if not va or not vb:
        return 0.0
    dot = sum(c * vb[w] for w, c in va.items())
    na = sum(c * c for c in va.values())
    nb = sum(c * c for c in vb.values())
    return min(1.0, dot / math.sqrt(na * nb))


def score_pair(paragraph_text: str, feature_text: str) -> MatchScore:
    return MatchScore.of(text_cosine(paragraph_text, feature_text), sentence_bleu(paragraph_text, feature_text))


def match_paragraph_to_claim(paragraph_text: str, claims: Sequence[ClaimFeature]) -> tuple[ClaimFeature, MatchScore]:
    """Best-matching claim feature; ties go to the lowest (claim_number, index)."""
    if not claims:
        raise ValueError("no claim features to match against")
    best: tuple[ClaimFeature, MatchScore] | None = None
    for feature in sorted(claims, key=lambda f: (f.claim_number, f.index)):
        score = score_pair(paragraph_text, feature.text)
        if best is None or score.combined > best[1].combined:
            best = (feature, score)
    return best


def _document_bindings(doc: PatentDocument) -> dict[str, str]:
    bindings: dict[str, str] = {}
    for p in doc.paragraphs:
        for pair in p.component_pairs:
            bindings.setdefault(pair.number, pair.name)
    return bindings


def build_aligned_tuples(doc: PatentDocument, min_score: float = 0.0) -> list[AlignedTuple]:
    """Run the full alignment chain for one document, ordered by paragraph ordinal."""
    features = doc.features()
    if not features:
        return []
    kept = filter_figure_paragraphs(doc)
    assignment = match_description_to_paragraph(doc, kept)
    bindings = _document_bindings(doc)
    out = []
    for p in kept:
        if p.ordinal not in assignment:
            continue
        primary = first_figure(p.text)
        try:
            text = strip_foreign_figure_sentences(p, primary)
        except EmptyResult as exc:
            log.debug("%s: %s", doc.doc_id, exc)
            continue
        feature, score = match_paragraph_to_claim(text, features)
        if score.combined < min_score:
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            pairs = extract_component_pairs(text, dict(bindings))
        out.append(
            AlignedTuple(
                doc_id=doc.doc_id,
                claim_feature=feature,
                paragraph_ordinal=p.ordinal,
                drawing_index=assignment[p.ordinal],
                score=score,
                figure_ref=primary,
                text=text,
                component_pairs=tuple(pairs),
            )
        )
    return out
