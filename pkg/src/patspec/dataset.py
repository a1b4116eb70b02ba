"""Training-sample emission, seeded train/test split and validated JSONL I/O."""

from __future__ import annotations

import hashlib
import json
import logging
import random
from collections.abc import Iterable, Mapping, Sequence
from pathlib import Path
from typing import TypeVar

from pydantic import BaseModel, ValidationError

from patspec.align import AlignedTuple
from patspec.enrich import assemble_input, build_claim_context, tag_text
from patspec.errors import DuplicateSampleError, SchemaError, TooFewSamples
from patspec.model import PatentDocument, TrainingSample

log = logging.getLogger(__name__)

M = TypeVar("M", bound=BaseModel)
T = TypeVar("T")

DEFAULT_TEST_SIZE = 1000


def sample_id_for(t: AlignedTuple) -> str:
    return f"{t.doc_id}#{t.paragraph_ordinal}#{t.claim_feature.claim_number}.{t.claim_feature.index}"


def emit_samples(
    aligned: Iterable[AlignedTuple],
    docs: Mapping[str, PatentDocument],
    require_image: bool = False,
    image_prefix: str = "",
) -> list[TrainingSample]:
    """Build one ``TrainingSample`` per aligned tuple, ordered by (doc, paragraph).

    ``prev_paragraph_ordinal`` is the ordinal of the previous emitted
    paragraph of the same document, 0 for the first one. Tuples whose drawing
    has no image are skipped with a warning when ``require_image`` is set.
    """
    tuples = sorted(aligned, key=lambda t: (t.doc_id, t.paragraph_ordinal))
    samples: list[TrainingSample] = []
    seen: set[str] = set()
    prev: dict[str, int] = {}
    for t in tuples:
        sid = sample_id_for(t)
        if sid in seen:
            raise DuplicateSampleError(f"duplicate sample id {sid}")
        seen.add(sid)
        doc = docs[t.doc_id]
        drawing = doc.drawings[t.drawing_index]
        if require_image and not drawing.image_path:
            log.warning("skipping %s: drawing %d has no image", sid, t.drawing_index)
            continue
        image_path = f"{image_prefix}{drawing.image_path}" if drawing.image_path else ""
        samples.append(
            TrainingSample(
                sample_id=sid,
                claim_feature=t.claim_feature,
                claim_context=build_claim_context(t.claim_feature, doc),
                brief_description=doc.brief_descriptions[t.drawing_index].text,
                image_path=image_path,
                component_pairs=t.component_pairs,
                prev_paragraph_ordinal=prev.get(t.doc_id, 0),
                cur_paragraph_ordinal=t.paragraph_ordinal,
                target_text=t.text,
                target_enriched=tag_text(t.text, t.component_pairs, {t.figure_ref}),
                figure_ref=t.figure_ref,
            )
        )
        prev[t.doc_id] = t.paragraph_ordinal
    return samples


def to_chat_record(sample: TrainingSample, instruction: str) -> dict:
    """Image-text-to-text chat record (user turn with image + prompt, assistant target)."""
    return {
        "id": sample.sample_id,
        "images": [sample.image_path] if sample.image_path else [],
        "messages": [
            {
                "role": "user",
                "content": ([{"type": "image"}] if sample.image_path else [])
                + [{"type": "text", "text": assemble_input(sample, instruction)}],
            },
            {"role": "assistant", "content": [{"type": "text", "text": sample.target_enriched}]},
        ],
    }


def split(samples: Sequence[T], test_size: int = DEFAULT_TEST_SIZE, seed: int = 0) -> tuple[list[T], list[T]]:
    """Draw ``test_size`` samples uniformly without replacement; the rest is train.

    Both parts keep the input order. The same seed gives the same split.
    """
    if test_size < 0:
        raise ValueError("test_size must be non-negative")
    if len(samples) <= test_size:
        raise TooFewSamples(f"{len(samples)} samples cannot yield a test set of {test_size} plus training data")
    test_idx = set(random.Random(seed).sample(range(len(samples)), test_size))
    train = [s for i, s in enumerate(samples) if i not in test_idx]
    test = [s for i, s in enumerate(samples) if i in test_idx]
    return train, test


def split_manifest(train: Sequence[TrainingSample], test: Sequence[TrainingSample], seed: int, **metadata) -> dict:
    digest = hashlib.sha256("\n".join(s.sample_id for s in test).encode()).hexdigest()
    return {
        "seed": seed,
        "rng": "python random.Random.sample",
        "granularity": "sample",
        "train_size": len(train),
        "test_size": len(test),
        "test_ids_sha256": digest,
        **metadata,
    }


def write_jsonl(path: str | Path, records: Iterable[BaseModel | dict]) -> int:
    """Write one JSON object per line (UTF-8, no BOM). Returns the line count."""
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            if isinstance(rec, BaseModel):
                fh.write(rec.model_dump_json())
            else:
                fh.write(json.dumps(rec, ensure_ascii=False))
            fh.write("\n")
            n += 1
    return n


def read_jsonl(path: str | Path, model: type[M]) -> list[M]:
    """Parse and validate every line; errors name the line number and field."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(model.model_validate_json(line))
            except ValidationError as exc:
                err = exc.errors()[0]
                field = ".".join(str(p) for p in err["loc"]) or "<record>"
                raise SchemaError(f"{path}:{lineno}: field '{field}': {err['msg']}", line=lineno, field=field) from exc
    return out


def read_records(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def attach_images(
    samples: Iterable[TrainingSample],
    available: Iterable[str],
    prefix: str = "",
    require_image: bool = True,
) -> list[TrainingSample]:
    """Point ``image_path`` at preprocessed images.

    ``available`` holds the image names that were normalized successfully.
    Samples whose image is not among them lose their image, or are dropped
    with a warning when ``require_image`` is set.
    """
    names = set(available)
    out = []
    for s in samples:
        name = Path(s.image_path).name if s.image_path else ""
        if name and name in names:
            out.append(s.model_copy(update={"image_path": f"{prefix}{name}"}))
        elif require_image:
            log.warning("dropping %s: no preprocessed image", s.sample_id)
        else:
            out.append(s.model_copy(update={"image_path": ""}))
    return out
