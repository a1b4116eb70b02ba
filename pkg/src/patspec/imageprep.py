"""Drawing preprocessing: orientation correction and exact max-dimension rescaling."""

from __future__ import annotations

import json
import logging
import shutil
from collections.abc import Iterable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

from PIL import Image, ImageOps, UnidentifiedImageError

from patspec.errors import DataError, UndecodableImage, ZeroDimension

log = logging.getLogger(__name__)

ABLATION_SIZES = (256, 512, 1024, 2048, 4096)
DEFAULT_MAX_DIM = 4096
IMAGE_SUFFIXES = {".png", ".tif", ".tiff", ".jpg", ".jpeg", ".gif", ".bmp", ".webp"}
_ROTATIONS = {0: None, 90: Image.Transpose.ROTATE_270, 180: Image.Transpose.ROTATE_180, 270: Image.Transpose.ROTATE_90}
_EXIF_ORIENTATION = 0x0112


@dataclass(frozen=True)
class ImageMeta:
    path_in: str
    path_out: str
    status: str  # "normalized" | "already_normalized" | "error"
    orig_height: int = 0
    orig_width: int = 0
    height: int = 0
    width: int = 0
    scale: float = 1.0
    resample: str = "none"
    rotation: str = "none"
    error: str | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def check_target(target_max: int, allow_any: bool = False) -> int:
    if target_max <= 0:
        raise ValueError(f"max dimension must be positive, got {target_max}")
    if not allow_any and target_max not in ABLATION_SIZES:
        raise ValueError(f"max dimension {target_max} not in {ABLATION_SIZES}; pass allow_any to override")
    return target_max


def scaled_size(width: int, height: int, target_max: int) -> tuple[int, int, float]:
    """New (width, height) with the longer side exactly ``target_max``."""
    if width <= 0 or height <= 0:
        raise ZeroDimension(f"image has zero dimension {width}x{height}")
    scale = target_max / max(width, height)
    if width >= height:
        return target_max, max(1, round(height * scale)), scale
    return max(1, round(width * scale)), target_max, scale


def normalize_image(
    path_in: str | Path,
    path_out: str | Path,
    target_max: int = DEFAULT_MAX_DIM,
    force_rotate: int | None = None,
    allow_any: bool = False,
) -> ImageMeta:
    """Rotate a drawing upright and rescale it so ``max(H, W) == target_max``.

    Orientation comes from the EXIF orientation tag; ``force_rotate`` adds a
    clockwise rotation of 0/90/180/270 degrees on top. Images are upscaled as
    well as downscaled: area averaging going down, bilinear going up. An image
    that needs neither rotation nor resizing is copied byte for byte and
    reported as ``already_normalized``.
    """
    check_target(target_max, allow_any)
    if force_rotate not in (None, *_ROTATIONS):
        raise ValueError(f"force_rotate must be one of 0, 90, 180, 270, got {force_rotate}")
    path_in, path_out = Path(path_in), Path(path_out)
    try:
        img = Image.open(path_in)
        img.load()
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise UndecodableImage(f"{path_in}: {exc}") from exc
    orig_w, orig_h = img.size
    if orig_w == 0 or orig_h == 0:
        raise ZeroDimension(f"{path_in}: zero dimension {orig_w}x{orig_h}")

    exif_orientation = img.getexif().get(_EXIF_ORIENTATION, 1)
    rotation = []
    if exif_orientation not in (None, 1):
        img = ImageOps.exif_transpose(img)
        rotation.append(f"exif:{exif_orientation}")
    if force_rotate:
        img = img.transpose(_ROTATIONS[force_rotate])
        rotation.append(f"force:{force_rotate}")

    w, h = img.size
    new_w, new_h, scale = scaled_size(w, h, target_max)
    path_out.parent.mkdir(parents=True, exist_ok=True)
    if not rotation and (new_w, new_h) == (w, h):
        if path_in.resolve() != path_out.resolve():
            shutil.copyfile(path_in, path_out)
        return ImageMeta(str(path_in), str(path_out), "already_normalized", orig_h, orig_w, h, w, 1.0)

    if img.mode in ("1", "P", "LA", "I;16"):
        img = img.convert("RGBA" if "transparency" in img.info or img.mode == "LA" else "L")
    if (new_w, new_h) == (w, h):
        resample_name = "none"
    elif scale < 1:
        img = img.resize((new_w, new_h), Image.Resampling.BOX)
        resample_name = "box"
    else:
        img = img.resize((new_w, new_h), Image.Resampling.BILINEAR)
        resample_name = "bilinear"
    fmt = Image.registered_extensions().get(path_out.suffix.lower())
    if fmt == "JPEG" and img.mode not in ("RGB", "L"):
        img = img.convert("RGB")
    img.save(path_out, format=fmt)
    return ImageMeta(
        str(path_in), str(path_out), "normalized", orig_h, orig_w, new_h, new_w, scale, resample_name, "+".join(rotation) or "none"
    )


def batch_normalize(
    in_dir: str | Path,
    out_dir: str | Path,
    target_max: int = DEFAULT_MAX_DIM,
    force_rotate: int | None = None,
    paths: Iterable[str] | None = None,
    allow_any: bool = False,
    jobs: int = 1,
) -> list[ImageMeta]:
    """Normalize every image under ``in_dir`` (or only ``paths``, relative to it).

    Failures are recorded per file and never abort the batch. The report is
    sorted by relative path.
    """
    check_target(target_max, allow_any)
    in_dir, out_dir = Path(in_dir), Path(out_dir)
    if paths is None:
        rel = sorted(str(p.relative_to(in_dir)) for p in in_dir.rglob("*") if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)
    else:
        rel = sorted(set(p for p in paths if p))

    def one(r: str) -> ImageMeta:
        src, dst = in_dir / r, out_dir / r
        try:
            return normalize_image(src, dst, target_max, force_rotate, allow_any)
        except (DataError, OSError, ValueError) as exc:
            log.warning("imageprep %s: %s", src, exc)
            return ImageMeta(str(src), str(dst), "error", error=f"{type(exc).__name__}: {exc}")

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(one, rel))
    return [one(r) for r in rel]


def write_report(report: Iterable[ImageMeta], path: str | Path) -> None:
    Path(path).write_text("".join(m.to_json() + "\n" for m in report), encoding="utf-8")
