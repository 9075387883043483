"""Foreground extraction, mask-quality filtering and background replacement."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from PIL import Image

from .errors import EmptyMask, OutOfBounds, PoolTooSmall
from .geometry import BBox, Mask, iou, mask_to_bbox
from .records import AnnotatedImage, ObjectCutout
from .rng import stream

T_IOU = 0.75


@dataclass(frozen=True)
class QualityFilterParams:
    t_iou: float = T_IOU

    def __post_init__(self):
        if not 0 < self.t_iou <= 1:
            raise ValueError(f"t_iou must be in (0, 1], got {self.t_iou}")


@dataclass(frozen=True)
class FilterResult:
    accepted: bool
    iou: float


@dataclass(frozen=True)
class VariantGroup:
    source_id: str
    variants: Tuple[AnnotatedImage, ...]
    background_ids: Tuple[str, ...]

    @property
    def k(self) -> int:
        return len(self.variants)


@dataclass(frozen=True)
class Rejected:
    source_id: str
    reason: str
    ious: Tuple[float, ...] = ()


def erode(bits: np.ndarray) -> np.ndarray:
    """One step of 4-neighbour binary erosion; pixels on the canvas edge survive."""
    out = bits.copy()
    out[1:, :] &= bits[:-1, :]
    out[:-1, :] &= bits[1:, :]
    out[:, 1:] &= bits[:, :-1]
    out[:, :-1] &= bits[:, 1:]
    return out


def extract_foreground(img: AnnotatedImage, m: Mask, category_id: int = 0,
                       *, erode_edge: bool = False, **meta) -> ObjectCutout:
    """Crop ``img`` to the mask's tight box with alpha taken from the mask bits."""
    if (m.width, m.height) != (img.width, img.height):
        raise ValueError(
            f"mask {m.width}x{m.height} does not match image {img.width}x{img.height}"
        )
    bits = erode(m.bits) if erode_edge else m.bits
    box = mask_to_bbox(Mask(bits))
    sl = (slice(box.y, box.y2), slice(box.x, box.x2))
    rgba = np.empty((box.h, box.w, 4), dtype=np.uint8)
    rgba[..., :3] = img.pixels[sl]
    rgba[..., 3] = np.where(bits[sl], 255, 0)
    return ObjectCutout(rgba, category_id, origin=(box.x, box.y),
                        source_id=img.source_id, **meta)


def mask_quality_filter(m: Mask, gt: BBox, p: QualityFilterParams = QualityFilterParams()) -> FilterResult:
    """Accept a mask only if its tight box overlaps ``gt`` with IoU strictly above the threshold."""
    value = iou(mask_to_bbox(m), gt)
    return FilterResult(value > p.t_iou, value)


def composite(cutouts: Sequence[Tuple[ObjectCutout, Tuple[int, int]]], bg: np.ndarray) -> np.ndarray:
    """Paste cutouts (top-left anchored) onto a copy of ``bg``; later ones win."""
    out = np.array(bg, dtype=np.uint8, copy=True)
    H, W = out.shape[:2]
    for cut, (x, y) in cutouts:
        if x < 0 or y < 0 or x + cut.native_w > W or y + cut.native_h > H:
            raise OutOfBounds(
                f"cutout {cut.native_w}x{cut.native_h} at ({x}, {y}) exceeds {W}x{H} canvas"
            )
        region = out[y:y + cut.native_h, x:x + cut.native_w]
        sel = cut.opaque
        region[sel] = cut.pixels[..., :3][sel]
    return out


def _load_rgb(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.array(im.convert("RGB"))


def fit_background(pixels: np.ndarray, width: int, height: int) -> np.ndarray:
    if pixels.shape[1] == width and pixels.shape[0] == height:
        return pixels
    im = Image.fromarray(pixels, "RGB").resize((width, height), Image.Resampling.BILINEAR)
    return np.array(im)


def expand_image(
    img: AnnotatedImage,
    masks: Sequence[Mask],
    pool: Sequence,
    k: int = 4,
    filter: QualityFilterParams = QualityFilterParams(),
    seed: int = 0,
    *,
    erode_edge: bool = False,
    apply_filter: bool = True,
    loader: Callable = None,
) -> Union[VariantGroup, Rejected]:
    """Composite the image's foregrounds onto ``k`` distinct pool backgrounds.

    ``pool`` holds background records (anything with ``record_id`` and
    ``image_path``). The whole image is rejected if any mask fails the
    quality filter.
    """
    if len(masks) != len(img.annotations):
        raise ValueError(
            f"{img.source_id}: {len(masks)} masks for {len(img.annotations)} annotations"
        )
    if len(pool) < k:
        raise PoolTooSmall(f"pool holds {len(pool)} backgrounds, need {k}")
    loader = loader or (lambda rec: _load_rgb(rec.image_path))

    cutouts = []
    ious = []
    for ann, m in zip(img.annotations, masks):
        if m.is_empty():
            return Rejected(img.source_id, "empty-mask")
        res = mask_quality_filter(m, ann.bbox, filter)
        ious.append(res.iou)
        if apply_filter and not res.accepted:
            return Rejected(img.source_id, "mask-quality", tuple(ious))
        cut = extract_foreground(img, m, ann.category_id, erode_edge=erode_edge) \
            if not erode_edge or erode(m.bits).any() else None
        if cut is not None:
            cutouts.append((cut, cut.origin))

    rng = stream(seed, "replace", img.source_id)
    picks = rng.choice(len(pool), size=k, replace=False)
    variants = []
    for i in picks:
        rec = pool[int(i)]
        bg = fit_background(loader(rec), img.width, img.height)
        variants.append(AnnotatedImage(composite(cutouts, bg), img.annotations, img.source_id))
    return VariantGroup(img.source_id, tuple(variants),
                        tuple(pool[int(i)].record_id for i in picks))
