"""Text primitives shared by ingest, align, enrich and rank.

Figure-reference recognition, the figure-safe sentence splitter, the
content-word tokenizer used by the cosine similarity, and the simulated
component (name, reference numeral) extractor.
"""

from __future__ import annotations

import re
import warnings
from collections.abc import Iterator
from dataclasses import dataclass

from patspec.model import ComponentPair, FigureNumber

# --------------------------------------------------------------------------
# figure references
# --------------------------------------------------------------------------

_FIG_TOKEN = r"(?:FIGURES?|FIGS?\.|Figs?\.|Figures?)"
_FIG_ITEM = r"\d+[A-Za-z]?(?![A-Za-z0-9])"
_FIG_SEP = r"(?:\s*,\s*(?:and\s+|or\s+)?|\s+and\s+|\s+or\s+|\s*[-–]\s*|\s+through\s+)"
FIGURE_MENTION_RE = re.compile(
    rf"(?<![A-Za-z]){_FIG_TOKEN}\s*(?P<items>{_FIG_ITEM}(?:{_FIG_SEP}{_FIG_ITEM})*)"
)
_ITEM_OR_SEP_RE = re.compile(rf"(?P<item>{_FIG_ITEM})|(?P<range>\s*[-–]\s*|\s+through\s+)")

MAX_RANGE = 100


@dataclass(frozen=True)
class FigureMention:
    start: int
    end: int
    figures: tuple[FigureNumber, ...]


def _expand_range(lo: FigureNumber, hi: FigureNumber) -> list[FigureNumber]:
    if lo.suffix is None and hi.suffix is None and lo.major <= hi.major <= lo.major + MAX_RANGE:
        return [FigureNumber(major=m) for m in range(lo.major, hi.major + 1)]
    if lo.major == hi.major and lo.suffix and hi.suffix and lo.suffix <= hi.suffix:
        return [FigureNumber(major=lo.major, suffix=chr(c)) for c in range(ord(lo.suffix), ord(hi.suffix) + 1)]
    return [lo, hi]


def parse_figure_list(items: str) -> list[FigureNumber]:
    out: list[FigureNumber] = []
    pending_range = False
    for m in _ITEM_OR_SEP_RE.finditer(items):
        if m.group("range") is not None:
            pending_range = True
            continue
        num = FigureNumber.model_validate(m.group("item"))
        if pending_range and out:
            lo = out.pop()
            out.extend(_expand_range(lo, num))
        else:
            out.append(num)
        pending_range = False
    seen: dict[FigureNumber, None] = {}
    for f in out:
        seen.setdefault(f, None)
    return list(seen)


def iter_figure_mentions(text: str) -> Iterator[FigureMention]:
    """Yield figure mentions in text order; figures keep their written order."""
    for m in FIGURE_MENTION_RE.finditer(text):
        figs = parse_figure_list(m.group("items"))
        if figs:
            yield FigureMention(m.start(), m.end(), tuple(figs))


def extract_figure_refs(text: str) -> frozenset[FigureNumber]:
    """Return the set of figures referenced by ``FIG.``/``Fig.``/``Figure`` tokens."""
    return frozenset(f for mention in iter_figure_mentions(text) for f in mention.figures)


def first_figure(text: str) -> FigureNumber | None:
    for mention in iter_figure_mentions(text):
        return mention.figures[0]
    return None


# --------------------------------------------------------------------------
# sentences
# --------------------------------------------------------------------------

_PROTECTED = {"fig", "figs", "e.g", "i.e", "no", "nos", "ser", "u.s", "vs", "approx", "et al", "al", "ref", "refs"}
_BOUNDARY_RE = re.compile(r"[.?!]+(?=\s)")


def split_sentences(text: str) -> list[str]:
    """Split on ``.``/``?``/``!`` followed by whitespace, never after ``FIG.``-style tokens."""
    sentences = []
    start = 0
    for m in _BOUNDARY_RE.finditer(text):
        if m.group().startswith("."):
            word = re.search(r"([A-Za-z.]+)$", text[start : m.start()])
            if word and word.group(1).lower().rstrip(".") in _PROTECTED:
                continue
        piece = text[start : m.end()].strip()
        if piece:
            sentences.append(piece)
        start = m.end()
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


# --------------------------------------------------------------------------
# content words
# --------------------------------------------------------------------------

STOPWORDS = frozenset(
    """
    a about above after again against all am an and any are aren't as at be because been before being below
    between both but by can cannot could couldn't did didn't do does doesn't doing don't down during each few
    for from further had hadn't has hasn't have haven't having he her here hers herself him himself his how i
    if in into is isn't it it's its itself just me more most my myself no nor not now of off on once only or
    other our ours ourselves out over own same she should shouldn't so some such than that the their theirs
    them themselves then there these they this those through to too under until up very was wasn't we were
    weren't what when where which while who whom why will with won't would wouldn't you your yours yourself
    yourselves also may might must shall via within without upon whether thereof therein wherein whereby
    """.split()
)

_WORD_RE = re.compile(r"[a-z0-9]+")


def content_words(text: str) -> list[str]:
    """Lower-cased alphanumeric word tokens with English stopwords removed."""
    return [w for w in _WORD_RE.findall(text.lower()) if w not in STOPWORDS]


# --------------------------------------------------------------------------
# component pairs
# --------------------------------------------------------------------------

class ComponentConsistencyWarning(UserWarning):
    """A reference numeral was bound to two unrelated names in one document."""


_NUMBER_RE = re.compile(r"(?<=\s)(\d+[a-z]?)(?![A-Za-z0-9])(?![.,]\d)")
_PRECEDING_WORDS_RE = re.compile(r"((?:[A-Za-z][A-Za-z-]*[ \t\n]+){1,4})$")
_NAME_WORD_RE = re.compile(r"^[a-z][a-z-]*$")
_CAP_WORD_RE = re.compile(r"^[A-Z][a-z-]*$")

# words that can never be part of a component name
_NON_NAME_WORDS = STOPWORDS | frozenset(
    """
    said claim claims fig figs figure figures paragraph paragraphs col column columns line lines page pages
    table tables equation equations version year years approximately least number numeral numerals
    see shown show shows depicts depicted illustrates illustrated includes including include comprises
    comprising comprise contains containing coupled connected connects connect receives receive sends send
    stores store provides provide provided using used uses having via performs perform step-by-step
    diagram embodiment embodiments example examples
    """.split()
)

YEAR_RANGE = range(1900, 2100)


def _name_before(text: str, pos: int) -> str | None:
    m = _PRECEDING_WORDS_RE.search(text[:pos])
    if not m:
        return None
    words = m.group(1).split()
    words_start = m.start(1)
    taken: list[str] = []
    for i in range(len(words) - 1, -1, -1):
        w = words[i]
        if w.endswith("-"):
            break
        if _NAME_WORD_RE.match(w):
            pass
        elif i == 0 and _CAP_WORD_RE.match(w) and re.search(r"(?:^|[.!?:]\s+|^\s*)$", text[:words_start]):
            pass
        else:
            break
        if w.lower() in _NON_NAME_WORDS:
            break
        taken.append(w.lower())
    if not taken:
        return None
    return " ".join(reversed(taken))


def _compatible(a: str, b: str) -> bool:
    wa, wb = a.split(), b.split()
    n = min(len(wa), len(wb))
    return wa[-n:] == wb[-n:]


def extract_component_pairs(text: str, bindings: dict[str, str] | None = None) -> list[ComponentPair]:
    """Simulate reading (component name, reference numeral) pairs off a drawing.

    ``bindings`` maps numerals to the first name seen for them in the document
    and is updated in place; pass one dict across a document's paragraphs to
    get document-level consistency. A numeral later attached to an unrelated
    name triggers a ``ComponentConsistencyWarning`` and the first binding is
    kept. Names that share trailing words with the first binding ("first
    processor" vs "processor") are treated as the same component and reported
    under the first name. Four-digit numbers in 1900-2099 only count when the
    numeral is already bound, which keeps years out.
    """
    if bindings is None:
        bindings = {}
    out: dict[ComponentPair, None] = {}
    for m in _NUMBER_RE.finditer(text):
        number = m.group(1)
        if len(number) == 4 and number.isdigit() and int(number) in YEAR_RANGE and number not in bindings:
            continue
        name = _name_before(text, m.start())
        if name is None:
            continue
        bound = bindings.get(number)
        if bound is None:
            bindings[number] = name
        elif bound != name:
            if not _compatible(bound, name):
                warnings.warn(
                    f"numeral {number} bound to {bound!r}, also used for {name!r}; keeping {bound!r}",
                    ComponentConsistencyWarning,
                    stacklevel=2,
                )
                continue
            name = bound
        out.setdefault(ComponentPair(name=name, number=number), None)
    return list(out)
