import json

import pytest
from hypothesis import given
from hypothesis import strategies as st
from pydantic import ValidationError

from patspec.enrich import tag_text
from patspec.model import (
    BriefDescription,
    Claim,
    ClaimFeature,
    ClaimKind,
    ComponentPair,
    DrawingRef,
    FigureNumber,
    MatchScore,
    PatentDocument,
    SpecParagraph,
    TrainingSample,
    fig,
)


def test_figure_number_canonical_and_ordering():
    assert FigureNumber.model_validate("2a").canonical == "2A"
    assert fig(3) == FigureNumber(major=3)
    assert sorted([fig("10"), fig("2B"), fig("2"), fig("2A")]) == [fig("2"), fig("2A"), fig("2B"), fig("10")]
    assert json.loads(fig("4A").model_dump_json()) == "4A"


@pytest.mark.parametrize("bad", ["0", "A", "2AB", "-1", ""])
def test_figure_number_rejects(bad):
    with pytest.raises(ValidationError):
        FigureNumber.model_validate(bad)


def test_component_pair_normalizes_name():
    pair = ComponentPair(name="  Network   Interface Card ", number="112")
    assert pair.name == "network interface card"
    assert ComponentPair(name="memory", number="104a").number == "104a"


@pytest.mark.parametrize("number", ["12AB", "a12", "1.2", "", "104A"])
def test_component_pair_number_pattern(number):
    with pytest.raises(ValidationError):
        ComponentPair(name="memory", number=number)


def test_component_pair_name_without_digits():
    with pytest.raises(ValidationError):
        ComponentPair(name="memory2", number="104")


def _claim(text="A system comprising: a processor; and a memory.") -> Claim:
    features = (
        ClaimFeature(claim_number=1, index=0, text="A system comprising:", delimiter=" "),
        ClaimFeature(claim_number=1, index=1, text="a processor", delimiter="; "),
        ClaimFeature(claim_number=1, index=2, text="and a memory."),
    )
    return Claim(number=1, kind=ClaimKind.independent, text=text, features=features)


def test_claim_reconstruction_invariant():
    assert _claim().features[2].text == "and a memory."
    with pytest.raises(ValidationError, match="reconstruct"):
        _claim("A system comprising: a processor; and a memory!")


def test_claim_dependent_needs_parent():
    feature = ClaimFeature(claim_number=2, index=0, text="The system of claim 1.")
    with pytest.raises(ValidationError):
        Claim(number=2, kind=ClaimKind.dependent, text="The system of claim 1.", features=(feature,))
    with pytest.raises(ValidationError):
        Claim(number=2, kind=ClaimKind.dependent, parent_number=2, text="The system of claim 1.", features=(feature,))


def test_feature_text_nonblank():
    with pytest.raises(ValidationError, match="claim_feature.text_nonempty"):
        ClaimFeature(claim_number=1, index=0, text="   ")


def test_paragraph_figure_refs_must_occur_in_text():
    SpecParagraph(ordinal=1, text="FIG. 1 shows a network 100.", figure_refs=[fig(1)])
    with pytest.raises(ValidationError):
        SpecParagraph(ordinal=1, text="FIG. 1 shows a network 100.", figure_refs=[fig(2)])


def test_brief_description_needs_figures():
    with pytest.raises(ValidationError):
        BriefDescription(drawing_index=0, text="A drawing.", figure_refs=[])


def _doc(**over) -> PatentDocument:
    fields = dict(
        doc_id="D1",
        claims=(_claim(),),
        paragraphs=(
            SpecParagraph(ordinal=1, text="FIG. 1 shows a processor 102.", figure_refs=[fig(1)]),
            SpecParagraph(ordinal=3, text="The memory 104 stores data."),
        ),
        drawings=(DrawingRef(drawing_index=0, image_path="D1-fig1.png", figure_refs=[fig(1)]),),
        brief_descriptions=(BriefDescription(drawing_index=0, text="FIG. 1 is a diagram.", figure_refs=[fig(1)]),),
        cpc_codes=("G06F 9/50",),
    )
    fields.update(over)
    return PatentDocument(**fields)


def test_document_invariants():
    doc = _doc()
    assert doc.paragraph(3).text.startswith("The memory")
    assert len(doc.features()) == 3
    with pytest.raises(ValidationError):
        _doc(drawings=())
    with pytest.raises(ValidationError):
        _doc(paragraphs=tuple(reversed(_doc().paragraphs)))


def test_document_round_trip():
    doc = _doc()
    assert PatentDocument.model_validate_json(doc.model_dump_json()) == doc


def test_match_score_combined_law():
    s = MatchScore.of(0.3, 0.7)
    assert s.combined == (0.3 + 0.7) / 2
    with pytest.raises(ValidationError, match="match_score.combined_is_mean"):
        MatchScore(cosine=0.3, bleu=0.7, combined=0.6)
    assert MatchScore.model_validate_json(s.model_dump_json()) == s


@given(st.floats(0, 1), st.floats(0, 1))
def test_match_score_round_trip_property(c, b):
    s = MatchScore.of(c, b)
    assert MatchScore.model_validate_json(s.model_dump_json()) == s


def _sample(**over):
    pairs = (ComponentPair(name="processor", number="102"),)
    target = "FIG. 1 shows a processor 102."
    fields = dict(
        sample_id="D1#1#1.1",
        claim_feature=ClaimFeature(claim_number=1, index=1, text="a processor"),
        claim_context="<ctx>A system comprising: and a memory.</ctx>",
        brief_description="FIG. 1 is a diagram.",
        image_path="D1-fig1.png",
        component_pairs=pairs,
        prev_paragraph_ordinal=0,
        cur_paragraph_ordinal=1,
        target_text=target,
        target_enriched=tag_text(target, pairs, {fig(1)}),
        figure_ref=fig(1),
    )
    fields.update(over)
    return TrainingSample(**fields)


def test_training_sample_invariants():
    s = _sample()
    assert TrainingSample.model_validate_json(s.model_dump_json()) == s
    with pytest.raises(ValidationError, match="enriched_strips_to_target"):
        _sample(target_enriched="FIG. 1 shows a CPU 102.")
    with pytest.raises(ValidationError, match="components_tagged"):
        _sample(target_enriched="<fig>FIG. 1</fig> shows a processor 102.")
    with pytest.raises(ValidationError, match="prev_before_cur"):
        _sample(prev_paragraph_ordinal=1)


def test_models_are_frozen():
    s = _sample()
    with pytest.raises(ValidationError):
        s.sample_id = "other"
