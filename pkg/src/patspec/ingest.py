"""Parse raw patent full text into ``PatentDocument`` values.

Two input formats are supported:

* ``uspto_xml`` -- a single USPTO grant/application full-text XML document
  (``<us-patent-grant>`` or ``<us-patent-application>``).
* ``plain_sections`` -- a light sectioned text format used for fixtures::

      doc_id: US0000001
      cpc: G06F 16/00; G06F 3/06

      == BRIEF DESCRIPTION OF THE DRAWINGS ==
      FIG. 1 is a block diagram of a system.

      == DETAILED DESCRIPTION ==
      [0005] FIG. 1 shows a system 100 ...

      == CLAIMS ==
      1. A system comprising: a processor; and a memory.

Drawing images are sidecar files next to the raw file named
``<doc_id>-fig<major><suffix>.<ext>``.
"""

from __future__ import annotations

import logging
import re
import warnings
import xml.etree.ElementTree as ET
from collections.abc import Iterable
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from pydantic import ValidationError

from patspec.errors import MalformedDocument, MissingDrawingFile
from patspec.model import (
    BriefDescription,
    Claim,
    ClaimFeature,
    ClaimKind,
    ComponentPair,
    DrawingRef,
    FigureNumber,
    PatentDocument,
    SpecParagraph,
)
from patspec.textproc import extract_component_pairs, extract_figure_refs, split_sentences

__all__ = [
    "InputFormat",
    "RawPatentFile",
    "parse_document",
    "segment_claim_features",
    "extract_figure_refs",
    "detect_claim_kind",
    "ingest_directory",
]

log = logging.getLogger(__name__)

IMAGE_EXTENSIONS = (".png", ".tif", ".tiff", ".jpg", ".jpeg", ".gif", ".bmp", ".webp")
BRIEF_HEADING_RE = re.compile(r"brief\s+description\s+of\s+(?:the\s+)?(?:several\s+views\s+of\s+the\s+)?drawings?", re.I)


class InputFormat(str, Enum):
    uspto_xml = "uspto_xml"
    plain_sections = "plain_sections"

    @classmethod
    def parse(cls, value: str | InputFormat) -> InputFormat:
        if isinstance(value, InputFormat):
            return value
        aliases = {"uspto-xml": cls.uspto_xml, "xml": cls.uspto_xml, "plain": cls.plain_sections}
        return aliases.get(value) or cls(value)


@dataclass(frozen=True)
class RawPatentFile:
    path: Path
    format: InputFormat
    bytes: bytes

    @classmethod
    def load(cls, path: str | Path, format: str | InputFormat | None = None) -> RawPatentFile:
        path = Path(path)
        data = path.read_bytes()
        if format is None:
            fmt = sniff_format(data)
            log.info("format of %s not declared; sniffed %s", path, fmt.value)
        else:
            fmt = InputFormat.parse(format)
        return cls(path=path, format=fmt, bytes=data)


def sniff_format(data: bytes) -> InputFormat:
    head = data.lstrip()[:200]
    if head.startswith(b"<?xml") or head.startswith(b"<us-patent") or head.startswith(b"<!DOCTYPE"):
        return InputFormat.uspto_xml
    return InputFormat.plain_sections


# --------------------------------------------------------------------------
# claims
# --------------------------------------------------------------------------

_PREAMBLE_RE = re.compile(r"\b(?:comprising|including|consisting\s+of)\s*:", re.I)
_DEPENDENT_RE = re.compile(r"\b[Cc]laim\s+(\d+)\b")


def _top_level_semicolons(text: str, start: int) -> list[int]:
    depth = 0
    out = []
    for i in range(start, len(text)):
        ch = text[i]
        if ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth = max(0, depth - 1)
        elif ch == ";" and depth == 0:
            out.append(i)
    return out


def segment_claim_features(claim_text: str, kind: ClaimKind | str = ClaimKind.independent, claim_number: int = 1) -> list[ClaimFeature]:
    """Split a claim into features: the preamble, then top-level ``;`` segments.

    The preamble runs through the first ``comprising:``/``including:``/
    ``consisting of:``; without one, the first segment is the first clause.
    Each feature records the characters that follow it as ``delimiter``.
    """
    if not claim_text.strip():
        raise ValueError("claim text is empty")
    # kind does not change the rule; dependent claims simply rarely carry a preamble colon
    ClaimKind(kind)
    cuts: list[int] = []  # end offsets of feature bodies
    first_semi = _top_level_semicolons(claim_text, 0)
    pre = _PREAMBLE_RE.search(claim_text)
    body_start = 0
    if pre and (not first_semi or pre.end() <= first_semi[0]):
        cuts.append(pre.end())
        body_start = pre.end()
    cuts.extend(_top_level_semicolons(claim_text, body_start))

    # spans of raw segments between cut points
    segments: list[tuple[int, int]] = []
    prev = 0
    for c in cuts:
        segments.append((prev, c))
        prev = c + (1 if claim_text[c : c + 1] == ";" else 0)
    segments.append((prev, len(claim_text)))

    features: list[list] = []  # [text, delimiter]
    lead = ""
    for seg_start, seg_end in segments:
        raw = claim_text[seg_start:seg_end]
        stripped = raw.strip()
        tail_sep = claim_text[seg_end : seg_end + 1] if seg_end < len(claim_text) and claim_text[seg_end] == ";" else ""
        if not stripped:
            if features:
                features[-1][1] += raw + tail_sep
            else:
                lead += raw + tail_sep
            continue
        left = len(raw) - len(raw.lstrip())
        right = len(raw.rstrip())
        if features:
            features[-1][1] += raw[:left]
        else:
            lead += raw[:left]
        text = raw[left:right]
        if not features and lead:
            text = lead + text
            lead = ""
        features.append([text, raw[right:] + tail_sep])
    if not features:
        raise ValueError("claim has no feature text")
    return [
        ClaimFeature(claim_number=claim_number, index=i, text=t, delimiter=d)
        for i, (t, d) in enumerate(features)
    ]


def detect_claim_kind(text: str) -> tuple[ClaimKind, int | None]:
    """A claim is dependent iff its first sentence mentions ``claim <k>``."""
    first = split_sentences(text)
    m = _DEPENDENT_RE.search(first[0] if first else text)
    if m:
        return ClaimKind.dependent, int(m.group(1))
    return ClaimKind.independent, None


def build_claim(number: int, text: str) -> Claim:
    kind, parent = detect_claim_kind(text)
    if parent is not None and parent >= number:
        # a forward or self reference is not a parent link
        kind, parent = ClaimKind.independent, None
    return Claim(
        number=number,
        kind=kind,
        parent_number=parent,
        text=text,
        features=tuple(segment_claim_features(text, kind, number)),
    )


# --------------------------------------------------------------------------
# document assembly
# --------------------------------------------------------------------------


@dataclass
class _Sections:
    doc_id: str
    cpc_codes: list[str]
    brief_paragraphs: list[str]
    spec_paragraphs: list[tuple[int | None, str]]
    claims: list[tuple[int, str]]


def _normalize_ws(text: str) -> str:
    return " ".join(text.split())


def _brief_descriptions(paragraphs: Iterable[str]) -> list[tuple[str, frozenset[FigureNumber]]]:
    out = []
    for para in paragraphs:
        for sentence in split_sentences(para):
            refs = extract_figure_refs(sentence)
            if refs:
                out.append((sentence, refs))
    return out


def _find_sidecar(directory: Path, doc_id: str, figures: Iterable[FigureNumber]) -> Path | None:
    if not directory.is_dir():
        return None
    index = {p.name.lower(): p for p in directory.iterdir() if p.suffix.lower() in IMAGE_EXTENSIONS}
    for f in sorted(figures):
        stem = f"{doc_id}-fig{f.canonical}".lower()
        for ext in IMAGE_EXTENSIONS:
            hit = index.get(stem + ext)
            if hit is not None:
                return hit
    return None


def _assemble(sections: _Sections, source: Path, allow_missing_images: bool) -> PatentDocument:
    if not sections.claims:
        raise MalformedDocument(f"{source}: no claims section")
    claims = []
    for expected, (number, text) in enumerate(sections.claims, start=1):
        if number != expected:
            raise MalformedDocument(f"{source}: claim {number} found where claim {expected} expected")
        try:
            claims.append(build_claim(number, text))
        except ValueError as exc:
            raise MalformedDocument(f"{source}: claim {number}: {exc}") from exc

    bindings: dict[str, str] = {}
    paragraphs = []
    next_ordinal = 0
    for ordinal, text in sections.spec_paragraphs:
        ordinal = ordinal if ordinal is not None and ordinal > next_ordinal else next_ordinal + 1
        next_ordinal = ordinal
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            pairs = extract_component_pairs(text, bindings)
        for w in caught:
            log.warning("%s [%d]: %s", sections.doc_id, ordinal, w.message)
        paragraphs.append(
            SpecParagraph(
                ordinal=ordinal,
                text=text,
                figure_refs=extract_figure_refs(text),
                component_pairs=tuple(pairs),
            )
        )

    briefs = []
    drawings = []
    for i, (text, refs) in enumerate(_brief_descriptions(sections.brief_paragraphs)):
        briefs.append(BriefDescription(drawing_index=i, text=text, figure_refs=refs))
        image = _find_sidecar(source.parent, sections.doc_id, refs)
        if image is None:
            msg = f"{sections.doc_id}: no image file for FIG. {', '.join(f.canonical for f in sorted(refs))}"
            if not allow_missing_images:
                raise MissingDrawingFile(msg)
            log.warning(msg)
        pairs: dict[ComponentPair, None] = {}
        for p in paragraphs:
            if refs & set(p.figure_refs):
                for pair in p.component_pairs:
                    pairs.setdefault(pair, None)
        drawings.append(
            DrawingRef(
                drawing_index=i,
                image_path=image.name if image is not None else "",
                figure_refs=refs,
                component_pairs=tuple(pairs),
            )
        )
    try:
        return PatentDocument(
            doc_id=sections.doc_id,
            claims=tuple(claims),
            paragraphs=tuple(paragraphs),
            drawings=tuple(drawings),
            brief_descriptions=tuple(briefs),
            cpc_codes=tuple(sections.cpc_codes),
        )
    except ValidationError as exc:
        raise MalformedDocument(f"{source}: {exc}") from exc


# --------------------------------------------------------------------------
# plain sectioned text
# --------------------------------------------------------------------------

_HEADING_RE = re.compile(r"^==\s*(.+?)\s*==\s*$")
_FIELD_RE = re.compile(r"^([A-Za-z_-]+)\s*:\s*(.*)$")
_PARA_NUM_RE = re.compile(r"^\[(\d+)\]\s*")
_CLAIM_NUM_RE = re.compile(r"^(\d+)\s*\.\s*")


def _blocks(lines: list[str]) -> list[str]:
    blocks, cur = [], []
    for line in lines:
        if line.strip():
            cur.append(line.strip())
        elif cur:
            blocks.append(" ".join(cur))
            cur = []
    if cur:
        blocks.append(" ".join(cur))
    return blocks


def _parse_plain(raw: RawPatentFile) -> _Sections:
    text = raw.bytes.decode("utf-8-sig")
    header: dict[str, str] = {}
    sections: list[tuple[str, list[str]]] = []
    for line in text.splitlines():
        h = _HEADING_RE.match(line)
        if h:
            sections.append((h.group(1), []))
            continue
        if not sections:
            f = _FIELD_RE.match(line.strip())
            if f:
                header[f.group(1).lower().replace("-", "_")] = f.group(2).strip()
            continue
        sections[-1][1].append(line)

    claims_sections = [body for title, body in sections if title.strip().upper() in {"CLAIMS", "WHAT IS CLAIMED IS", "CLAIMS:"}]
    if not claims_sections:
        raise MalformedDocument(f"{raw.path}: no CLAIMS heading")
    claims = []
    for block in _blocks(claims_sections[0]):
        m = _CLAIM_NUM_RE.match(block)
        if not m:
            raise MalformedDocument(f"{raw.path}: claim block without number: {block[:40]!r}")
        claims.append((int(m.group(1)), block[m.end() :]))

    brief, spec = [], []
    for title, body in sections:
        if title.strip().upper() in {"CLAIMS", "WHAT IS CLAIMED IS", "CLAIMS:", "ABSTRACT"}:
            continue
        for block in _blocks(body):
            m = _PARA_NUM_RE.match(block)
            ordinal = int(m.group(1)) if m else None
            body_text = block[m.end() :] if m else block
            if BRIEF_HEADING_RE.search(title):
                brief.append(body_text)
            else:
                spec.append((ordinal, body_text))

    doc_id = header.get("doc_id") or raw.path.stem
    cpc = [c.strip() for c in header.get("cpc", "").split(";") if c.strip()]
    return _Sections(doc_id, cpc, brief, spec, claims)


# --------------------------------------------------------------------------
# USPTO XML
# --------------------------------------------------------------------------


def _itertext(el: ET.Element) -> str:
    return _normalize_ws("".join(el.itertext()))


def _cpc_string(el: ET.Element) -> str | None:
    parts = {k: (el.findtext(k) or "").strip() for k in ("section", "class", "subclass", "main-group", "subgroup")}
    if not parts["section"]:
        return None
    code = f"{parts['section']}{parts['class']}{parts['subclass']}"
    if parts["main-group"]:
        code += f" {parts['main-group']}/{parts['subgroup'] or '00'}"
    return code


def _parse_xml(raw: RawPatentFile) -> _Sections:
    data = raw.bytes
    # bulk files carry a DOCTYPE pointing at an external DTD; ElementTree ignores it
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise MalformedDocument(f"{raw.path}: XML parse error: {exc}") from exc

    doc_number = root.findtext(".//publication-reference/document-id/doc-number")
    doc_id = (doc_number or raw.path.stem).strip()
    cpc = []
    for el in root.iter("classification-cpc"):
        code = _cpc_string(el)
        if code and code not in cpc:
            cpc.append(code)

    claims_el = root.find(".//claims")
    if claims_el is None or claims_el.find("claim") is None:
        raise MalformedDocument(f"{raw.path}: no claims section")
    claims = []
    for i, claim in enumerate(claims_el.iter("claim"), start=1):
        num = claim.get("num")
        number = int(num) if num and num.strip().isdigit() else i
        text = _itertext(claim)
        text = _CLAIM_NUM_RE.sub("", text, count=1) if text.startswith(f"{number}.") else text
        claims.append((number, text))

    brief, spec = [], []
    description = root.find(".//description")
    if description is not None:
        in_brief = False
        for el in description.iter():
            if el.tag == "heading":
                in_brief = bool(BRIEF_HEADING_RE.search(_itertext(el)))
            elif el.tag == "description-of-drawings":
                for p in el.iter("p"):
                    brief.append(_itertext(p))
            elif el.tag == "p" and not _inside(description, el, "description-of-drawings"):
                text = _itertext(el)
                if not text:
                    continue
                if in_brief:
                    brief.append(text)
                else:
                    num = el.get("num")
                    spec.append((int(num) if num and num.isdigit() else None, text))
    return _Sections(doc_id, cpc, brief, spec, claims)


def _inside(root: ET.Element, target: ET.Element, tag: str) -> bool:
    for container in root.iter(tag):
        for el in container.iter():
            if el is target:
                return True
    return False


# --------------------------------------------------------------------------
# public entry points
# --------------------------------------------------------------------------


def parse_document(raw: RawPatentFile, allow_missing_images: bool = False) -> PatentDocument:
    """Parse one raw file. Deterministic: identical bytes give identical documents."""
    if raw.format is InputFormat.uspto_xml:
        sections = _parse_xml(raw)
    else:
        sections = _parse_plain(raw)
    return _assemble(sections, raw.path, allow_missing_images)


def ingest_directory(
    directory: str | Path,
    format: str | InputFormat,
    allow_missing_images: bool = False,
) -> list[PatentDocument]:
    """Parse every ``*.xml`` (XML format) or ``*.txt`` (plain format) file, sorted by name."""
    fmt = InputFormat.parse(format)
    directory = Path(directory)
    if not directory.is_dir():
        raise MalformedDocument(f"corpus directory {directory} does not exist")
    pattern = "*.xml" if fmt is InputFormat.uspto_xml else "*.txt"
    docs = []
    for path in sorted(directory.glob(pattern)):
        docs.append(parse_document(RawPatentFile.load(path, fmt), allow_missing_images))
    log.info("ingested %d documents from %s", len(docs), directory)
    return docs
