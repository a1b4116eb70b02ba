"""Domain types shared by every pipeline stage.

All models are frozen pydantic models. Their JSON form (``model_dump_json``)
is the canonical JSONL record used on disk. Invariant violations raise
``pydantic.ValidationError`` whose message starts with the bracketed
invariant name, e.g. ``[claim.features_reconstruct_text]``.
"""

from __future__ import annotations

import re
from enum import Enum
from functools import total_ordering
from typing import Annotated, Any

from pydantic import (
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    field_validator,
    model_serializer,
    model_validator,
)

_FIGNUM_RE = re.compile(r"^\s*(\d+)\s*([A-Za-z]?)\s*$")
_COMPONENT_NUMBER_RE = re.compile(r"^[0-9]+[a-z]?$")


def _invariant(name: str, detail: str) -> ValueError:
    return ValueError(f"[{name}] {detail}")


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


@total_ordering
class FigureNumber(_Frozen):
    """A drawing figure label such as ``3`` or ``2A``.

    Serialized as its canonical string; parsing accepts either that string
    or a ``{"major", "suffix"}`` mapping.
    """

    major: int = Field(gt=0)
    suffix: str | None = None

    @model_validator(mode="before")
    @classmethod
    def _from_string(cls, value: Any) -> Any:
        if isinstance(value, int) and not isinstance(value, bool):
            return {"major": value}
        if isinstance(value, str):
            m = _FIGNUM_RE.match(value)
            if not m:
                raise _invariant("figure_number.syntax", f"cannot parse figure number {value!r}")
            return {"major": int(m.group(1)), "suffix": m.group(2) or None}
        return value

    @field_validator("suffix")
    @classmethod
    def _upper_suffix(cls, v: str | None) -> str | None:
        if v is None or v == "":
            return None
        if len(v) != 1 or not v.isalpha():
            raise _invariant("figure_number.suffix", f"suffix must be one letter, got {v!r}")
        return v.upper()

    @model_serializer
    def _to_string(self) -> str:
        return self.canonical

    @property
    def canonical(self) -> str:
        return f"{self.major}{self.suffix or ''}"

    @property
    def sort_key(self) -> tuple[int, str]:
        return (self.major, self.suffix or "")

    def __lt__(self, other: FigureNumber) -> bool:
        if not isinstance(other, FigureNumber):
            return NotImplemented
        return self.sort_key < other.sort_key

    def __str__(self) -> str:
        return self.canonical


def fig(label: str | int) -> FigureNumber:
    """Shorthand constructor: ``fig("2A")``."""
    return FigureNumber.model_validate(label)


def _sorted_figures(value: Any) -> Any:
    if value is None:
        return ()
    figs = {FigureNumber.model_validate(v) for v in value}
    return tuple(sorted(figs))


# Figure sets are stored sorted and de-duplicated so serialization is stable.
FigureSet = Annotated[tuple[FigureNumber, ...], BeforeValidator(_sorted_figures)]


class ComponentPair(_Frozen):
    name: str
    number: str

    @field_validator("name")
    @classmethod
    def _normalize_name(cls, v: str) -> str:
        name = " ".join(v.lower().split())
        if not name:
            raise _invariant("component_pair.name_nonempty", "component name is empty")
        if any(ch.isdigit() for ch in name):
            raise _invariant("component_pair.name_no_digits", f"name {name!r} contains digits")
        return name

    @field_validator("number")
    @classmethod
    def _check_number(cls, v: str) -> str:
        if not _COMPONENT_NUMBER_RE.match(v):
            raise _invariant("component_pair.number_pattern", f"number {v!r} must match [0-9]+[a-z]?")
        return v


class ClaimKind(str, Enum):
    independent = "independent"
    dependent = "dependent"


class ClaimFeature(_Frozen):
    """One limitation of a claim.

    ``delimiter`` holds the exact characters that follow the feature in the
    claim text, so joining ``text + delimiter`` over all features reproduces
    the claim byte for byte.
    """

    claim_number: int = Field(gt=0)
    index: int = Field(ge=0)
    text: str
    delimiter: str = ""

    @field_validator("text")
    @classmethod
    def _nonempty(cls, v: str) -> str:
        if not v.strip():
            raise _invariant("claim_feature.text_nonempty", "feature text is blank")
        return v


class Claim(_Frozen):
    number: int = Field(gt=0)
    kind: ClaimKind
    parent_number: int | None = None
    text: str
    features: tuple[ClaimFeature, ...]

    @model_validator(mode="after")
    def _check(self) -> Claim:
        if self.kind is ClaimKind.dependent:
            if self.parent_number is None:
                raise _invariant("claim.dependent_has_parent", f"dependent claim {self.number} has no parent")
            if not self.parent_number < self.number:
                raise _invariant(
                    "claim.parent_precedes",
                    f"claim {self.number} depends on later claim {self.parent_number}",
                )
        elif self.parent_number is not None:
            raise _invariant("claim.independent_no_parent", f"independent claim {self.number} has a parent")
        if not self.features:
            raise _invariant("claim.features_nonempty", f"claim {self.number} has no features")
        for i, f in enumerate(self.features):
            if f.claim_number != self.number or f.index != i:
                raise _invariant(
                    "claim.feature_numbering",
                    f"feature {i} of claim {self.number} is labelled ({f.claim_number}, {f.index})",
                )
        rebuilt = "".join(f.text + f.delimiter for f in self.features)
        if rebuilt != self.text:
            raise _invariant("claim.features_reconstruct_text", f"features of claim {self.number} do not rebuild its text")
        return self


class SpecParagraph(_Frozen):
    ordinal: int = Field(gt=0)
    text: str
    figure_refs: FigureSet = ()
    component_pairs: tuple[ComponentPair, ...] = ()

    @model_validator(mode="after")
    def _figs_in_text(self) -> SpecParagraph:
        from patspec.textproc import extract_figure_refs

        found = extract_figure_refs(self.text)
        missing = [f.canonical for f in self.figure_refs if f not in found]
        if missing:
            raise _invariant(
                "spec_paragraph.figure_refs_in_text",
                f"paragraph {self.ordinal} lists figures {missing} absent from its text",
            )
        return self


class BriefDescription(_Frozen):
    drawing_index: int = Field(ge=0)
    text: str
    figure_refs: FigureSet

    @field_validator("figure_refs")
    @classmethod
    def _nonempty(cls, v: tuple[FigureNumber, ...]) -> tuple[FigureNumber, ...]:
        if not v:
            raise _invariant("brief_description.figure_refs_nonempty", "brief description names no figure")
        return v


class DrawingRef(_Frozen):
    drawing_index: int = Field(ge=0)
    image_path: str = ""
    figure_refs: FigureSet = ()
    component_pairs: tuple[ComponentPair, ...] = ()


class PatentDocument(_Frozen):
    doc_id: str
    claims: tuple[Claim, ...]
    paragraphs: tuple[SpecParagraph, ...] = ()
    drawings: tuple[DrawingRef, ...] = ()
    brief_descriptions: tuple[BriefDescription, ...] = ()
    cpc_codes: tuple[str, ...] = ()

    @model_validator(mode="after")
    def _check(self) -> PatentDocument:
        if len(self.drawings) != len(self.brief_descriptions):
            raise _invariant(
                "patent_document.drawings_match_descriptions",
                f"{len(self.drawings)} drawings but {len(self.brief_descriptions)} brief descriptions",
            )
        for i, (d, b) in enumerate(zip(self.drawings, self.brief_descriptions)):
            if d.drawing_index != i or b.drawing_index != i:
                raise _invariant("patent_document.drawing_index", f"drawing/description {i} carries a different index")
        numbers = [c.number for c in self.claims]
        if numbers != list(range(1, len(numbers) + 1)):
            raise _invariant("patent_document.claims_contiguous", f"claim numbers {numbers} are not 1..{len(numbers)}")
        for c in self.claims:
            if c.parent_number is not None and c.parent_number > len(self.claims):
                raise _invariant("patent_document.parent_exists", f"claim {c.number} depends on missing claim {c.parent_number}")
        ordinals = [p.ordinal for p in self.paragraphs]
        if any(b <= a for a, b in zip(ordinals, ordinals[1:])):
            raise _invariant("patent_document.ordinals_increasing", "paragraph ordinals are not strictly increasing")
        return self

    def claim(self, number: int) -> Claim:
        return self.claims[number - 1]

    def paragraph(self, ordinal: int) -> SpecParagraph:
        for p in self.paragraphs:
            if p.ordinal == ordinal:
                return p
        raise KeyError(ordinal)

    def features(self) -> list[ClaimFeature]:
        return [f for c in self.claims for f in c.features]


class MatchScore(_Frozen):
    """Averaged cosine/BLEU similarity. ``combined`` is derived when omitted."""

    cosine: float = Field(ge=0.0, le=1.0)
    bleu: float = Field(ge=0.0, le=1.0)
    combined: float = Field(default=-1.0)

    @model_validator(mode="before")
    @classmethod
    def _derive(cls, data: Any) -> Any:
        if isinstance(data, dict) and "combined" not in data and "cosine" in data and "bleu" in data:
            data = {**data, "combined": (data["cosine"] + data["bleu"]) / 2}
        return data

    @model_validator(mode="after")
    def _check(self) -> MatchScore:
        if self.combined != (self.cosine + self.bleu) / 2:
            raise _invariant("match_score.combined_is_mean", f"combined {self.combined!r} != mean of parts")
        return self

    @classmethod
    def of(cls, cosine: float, bleu: float) -> MatchScore:
        return cls(cosine=cosine, bleu=bleu)


class TrainingSample(_Frozen):
    sample_id: str
    claim_feature: ClaimFeature
    claim_context: str
    brief_description: str
    image_path: str
    component_pairs: tuple[ComponentPair, ...]
    prev_paragraph_ordinal: int = Field(ge=0)
    cur_paragraph_ordinal: int = Field(gt=0)
    target_text: str
    target_enriched: str
    figure_ref: FigureNumber

    @model_validator(mode="after")
    def _check(self) -> TrainingSample:
        from patspec.enrich import component_regex, strip_tags

        if " ".join(strip_tags(self.target_enriched).split()) != " ".join(self.target_text.split()):
            raise _invariant("training_sample.enriched_strips_to_target", f"{self.sample_id}: tags do not strip back to target_text")
        for pair in self.component_pairs:
            if component_regex(pair).search(self.target_text) and not component_regex(pair, tagged=True).search(
                self.target_enriched
            ):
                raise _invariant(
                    "training_sample.components_tagged",
                    f"{self.sample_id}: {pair.name} {pair.number} is not tagged in target_enriched",
                )
        if self.prev_paragraph_ordinal >= self.cur_paragraph_ordinal:
            raise _invariant("training_sample.prev_before_cur", f"{self.sample_id}: prev paragraph not before current")
        return self
