"""Enriched representations: claim context blocks, special tags and prompts.

Tags are plain markup strings so a downstream fine-tuning stack can register
them as atomic tokens (see ``special_token_inventory``).
"""

from __future__ import annotations

import re
from collections.abc import Iterable, Sequence
from functools import lru_cache
from pathlib import Path

from patspec.errors import MissingParent, UnbalancedTags
from patspec.model import ClaimFeature, ClaimKind, ComponentPair, FigureNumber, PatentDocument, TrainingSample
from patspec.textproc import FIGURE_MENTION_RE, parse_figure_list


class TagGrammar:
    """Fixed tag names, in manifest order."""

    CLAIM_FEATURE = "cf"
    CONTEXT = "ctx"
    PARENT = "parent"
    FIGURE = "fig"
    COMPONENT_NAME = "cn"
    COMPONENT_NUMBER = "cd"
    PREV_PARAGRAPH = "prev_p"
    CUR_PARAGRAPH = "cur_p"
    DESCRIPTION = "desc"
    COMPONENTS = "comps"

    NAMES = ("cf", "ctx", "parent", "fig", "cn", "cd", "prev_p", "cur_p", "desc", "comps")

    @staticmethod
    def wrap(name: str, body: str) -> str:
        return f"<{name}>{body}</{name}>"


_TAG_RE = re.compile(r"<(/?)(" + "|".join(TagGrammar.NAMES) + r")>")


def special_token_inventory() -> list[str]:
    """Every tag string, opening then closing, in a fixed order."""
    return [t for name in TagGrammar.NAMES for t in (f"<{name}>", f"</{name}>")]


def write_token_manifest(path: str | Path) -> None:
    Path(path).write_text("\n".join(special_token_inventory()) + "\n", encoding="utf-8")


def read_token_manifest(path: str | Path) -> list[str]:
    return [line for line in Path(path).read_text(encoding="utf-8").splitlines() if line]


def strip_tags(text: str) -> str:
    """Remove all grammar tags and collapse the doubled spaces this leaves.

    Raises ``UnbalancedTags`` for unclosed, stray or same-kind nested tags.
    """
    stack: list[str] = []
    for m in _TAG_RE.finditer(text):
        closing, name = m.group(1), m.group(2)
        if not closing:
            if name in stack:
                raise UnbalancedTags(f"<{name}> nested inside itself at offset {m.start()}")
            stack.append(name)
        elif not stack or stack[-1] != name:
            raise UnbalancedTags(f"unexpected </{name}> at offset {m.start()}")
        else:
            stack.pop()
    if stack:
        raise UnbalancedTags(f"unclosed <{stack[-1]}>")
    if not _TAG_RE.search(text):
        return text
    return re.sub(r"(?<=\S) {2,}(?=\S)", " ", _TAG_RE.sub("", text))


def remove_tags(text: str) -> str:
    """Lenient ``strip_tags`` for model output: drops tags without checking balance."""
    return re.sub(r"(?<=\S) {2,}(?=\S)", " ", _TAG_RE.sub("", text)) if _TAG_RE.search(text) else text


def _name_pattern(name: str) -> str:
    return r"\s+".join(re.escape(w) for w in name.split())


@lru_cache(maxsize=4096)
def _component_regex(name: str, number: str, tagged: bool) -> re.Pattern[str]:
    if tagged:
        return re.compile(rf"<cn>{_name_pattern(name)}</cn>\s*<cd>{re.escape(number)}</cd>", re.I)
    return re.compile(rf"(?<![A-Za-z0-9-]){_name_pattern(name)}\s+{re.escape(number)}(?![A-Za-z0-9])", re.I)


def component_regex(pair: ComponentPair, tagged: bool = False) -> re.Pattern[str]:
    """Pattern for ``name number`` in running text, or its tagged form."""
    return _component_regex(pair.name, pair.number, tagged)


def tag_text(text: str, pairs: Sequence[ComponentPair], figures: Iterable[FigureNumber]) -> str:
    """Wrap figure mentions and component name/number occurrences in tags.

    A figure mention is tagged when it refers to one of ``figures``. A
    component is tagged where its name is immediately followed by its number;
    longer names are tried first and matches never overlap. Characters outside
    the inserted tags are left untouched.
    """
    wanted = set(figures)
    alternatives = []
    ordered = sorted(set(pairs), key=lambda p: (-len(p.name), p.name, p.number))
    for i, pair in enumerate(ordered):
        alternatives.append(
            rf"(?P<c{i}>(?<![A-Za-z0-9-])(?i:(?P<n{i}>{_name_pattern(pair.name)}))(?P<s{i}>\s+)(?P<d{i}>{re.escape(pair.number)})(?![A-Za-z0-9]))"
        )
    if wanted:
        alternatives.append(rf"(?P<fig>{FIGURE_MENTION_RE.pattern})")
    if not alternatives:
        return text
    scanner = re.compile("|".join(alternatives))

    def replace(m: re.Match[str]) -> str:
        if wanted and m.group("fig") is not None:
            figs = set(parse_figure_list(m.group("items")))
            return TagGrammar.wrap("fig", m.group()) if figs & wanted else m.group()
        for i in range(len(ordered)):
            if m.group(f"c{i}") is not None:
                return (
                    TagGrammar.wrap("cn", m.group(f"n{i}"))
                    + m.group(f"s{i}")
                    + TagGrammar.wrap("cd", m.group(f"d{i}"))
                )
        return m.group()

    return scanner.sub(replace, text)


def tag_component_list(pairs: Sequence[ComponentPair]) -> str:
    return "; ".join(f"{TagGrammar.wrap('cn', p.name)} {TagGrammar.wrap('cd', p.number)}" for p in pairs)


def build_claim_context(feature: ClaimFeature, doc: PatentDocument) -> str:
    """Sibling features of the feature's claim, plus the parent claim for dependents."""
    if not 1 <= feature.claim_number <= len(doc.claims):
        raise ValueError(f"claim {feature.claim_number} is not in document {doc.doc_id}")
    claim = doc.claim(feature.claim_number)
    siblings = " ".join(f.text for f in claim.features if f.index != feature.index)
    context = TagGrammar.wrap("ctx", siblings)
    if claim.kind is ClaimKind.dependent:
        if claim.parent_number is None or claim.parent_number > len(doc.claims):
            raise MissingParent(f"claim {claim.number} of {doc.doc_id} has no parent claim {claim.parent_number}")
        context += TagGrammar.wrap("parent", doc.claim(claim.parent_number).text)
    return context


def assemble_input(sample: TrainingSample, instruction: str) -> str:
    """The model prompt for one sample, in a fixed field order."""
    lines = [
        instruction.strip(),
        TagGrammar.wrap("prev_p", str(sample.prev_paragraph_ordinal))
        + TagGrammar.wrap("cur_p", str(sample.cur_paragraph_ordinal)),
        TagGrammar.wrap("cf", sample.claim_feature.text),
        sample.claim_context,
        TagGrammar.wrap("desc", sample.brief_description),
        TagGrammar.wrap("comps", tag_component_list(sample.component_pairs)),
    ]
    return "\n".join(lines)


DEFAULT_INSTRUCTION = (
    "Write the specification paragraph that describes the drawing for the claim feature below. "
    "Refer to the figure and to each listed component by name and reference numeral."
)
